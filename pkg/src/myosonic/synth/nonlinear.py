"""Waveshaped FM voice: three-operator phase modulation through a
normalized tanh shaper, with optional ring modulation and a slow seeded
random walk on the modulation indices.

The voice is a continuous tone; scenes gate it through its mixer strip.
"""

from __future__ import annotations

import numpy as np

from .base import SoundObject

DEFAULT_RATIOS = (1.01, 2.02, 3.98)
WALK_STEP = 0.02
WALK_BOUND = 0.05  # +/- 5 percent around the mapped index


class Nonlinear(SoundObject):
    OBJECT_ID = "nonlinear"
    PARAMS = {
        "carrier_hz": (40.0, 800.0, 110.0),
        "mod_index_1": (0.0, 8.0, 0.0),
        "mod_index_2": (0.0, 8.0, 0.0),
        "mod_index_3": (0.0, 8.0, 0.0),
        "drive": (1.0, 10.0, 1.0),
        "rm_hz": (0.0, 400.0, 0.0),
    }

    def __init__(self, sample_rate: int, seed: int = 0,
                 ratios: tuple[float, float, float] = DEFAULT_RATIOS):
        super().__init__(sample_rate, seed)
        if len(ratios) != 3 or any(r <= 0 for r in ratios):
            raise ValueError("nonlinear needs 3 positive modulator ratios")
        self.ratios = tuple(float(r) for r in ratios)
        self.carrier_phase = 0.0
        self.mod_phase = np.zeros(3)
        self.rm_phase = 0.0
        self.walk = np.zeros(3)

    def _render(self, n: int) -> np.ndarray:
        sr = self.sample_rate
        fc = self.param_block("carrier_hz", n)
        drive = self.param_block("drive", n)
        rm_hz = self.param_block("rm_hz", n)
        # one walk step per block, bounded at +/-5%
        self.walk = np.clip(
            self.walk + self.rng.uniform(-WALK_STEP, WALK_STEP, 3),
            -WALK_BOUND, WALK_BOUND)
        mod_sum = np.zeros(n)
        for k, ratio in enumerate(self.ratios):
            idx = self.param_block(f"mod_index_{k + 1}", n)
            ph = self.mod_phase[k] + np.cumsum(fc * ratio / sr)
            self.mod_phase[k] = ph[-1] % 1.0
            mod_sum += idx * (1.0 + self.walk[k]) * np.sin(2.0 * np.pi * ph)
        ph_c = self.carrier_phase + np.cumsum(fc / sr)
        self.carrier_phase = ph_c[-1] % 1.0
        y = np.tanh(drive * np.sin(2.0 * np.pi * ph_c + mod_sum))
        y /= np.tanh(drive)
        ph_rm = self.rm_phase + np.cumsum(rm_hz / sr)
        self.rm_phase = ph_rm[-1] % 1.0
        if rm_hz[0] > 0.0 or rm_hz[-1] > 0.0:
            y = y * np.sin(2.0 * np.pi * ph_rm)
        return y

    def reset(self):
        self.carrier_phase = 0.0
        self.mod_phase[:] = 0.0
        self.rm_phase = 0.0
