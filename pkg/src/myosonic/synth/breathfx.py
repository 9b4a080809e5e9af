"""Breath effect bus: Schroeder comb/allpass stages feeding a small
cross-coupled feedback delay network, mono in, stereo out."""

from __future__ import annotations

import numpy as np

from .base import Param
from .kernels import breath_chain_kernel

COMB_DELAYS_MS = (29.7, 37.1, 41.1, 43.7)
ALLPASS_DELAYS_MS = (5.0, 1.7)
FDN_DELAYS_MS = (150.0, 270.0, 390.0)

# Householder reflection for v = (1,1,1): orthogonal, fully cross-coupling
FDN_MATRIX = np.array([
    [1.0 / 3.0, -2.0 / 3.0, -2.0 / 3.0],
    [-2.0 / 3.0, 1.0 / 3.0, -2.0 / 3.0],
    [-2.0 / 3.0, -2.0 / 3.0, 1.0 / 3.0],
])

PARAMS = {
    "rt60_s": (0.2, 6.0, 2.0),
    "feedback": (0.0, 0.95, 0.0),
    "mix": (0.0, 1.0, 0.3),
}


class BreathChain:
    """Stateful bus effect; advanced once per block by the audio context."""

    OBJECT_ID = "breath_chain"
    PARAMS = PARAMS

    def __init__(self, sample_rate: int):
        self.sample_rate = int(sample_rate)
        self.params = {name: Param(lo, hi, default)
                       for name, (lo, hi, default) in PARAMS.items()}
        self.faults = 0

        def delays(ms_list):
            return np.array(
                [max(1, int(round(ms * 1e-3 * sample_rate)))
                 for ms in ms_list], dtype=np.int64)

        self.comb_delay = delays(COMB_DELAYS_MS)
        self.ap_delay = delays(ALLPASS_DELAYS_MS)
        self.fdn_delay = delays(FDN_DELAYS_MS)
        self.comb_buf = np.zeros((len(COMB_DELAYS_MS),
                                  int(self.comb_delay.max())))
        self.ap_buf = np.zeros((len(ALLPASS_DELAYS_MS),
                                int(self.ap_delay.max())))
        self.fdn_buf = np.zeros((len(FDN_DELAYS_MS),
                                 int(self.fdn_delay.max())))
        self.comb_idx = np.zeros(len(COMB_DELAYS_MS), dtype=np.int64)
        self.ap_idx = np.zeros(len(ALLPASS_DELAYS_MS), dtype=np.int64)
        self.fdn_idx = np.zeros(len(FDN_DELAYS_MS), dtype=np.int64)

    def set_target(self, name: str, value: float):
        self.params[name].set_target(value)

    def snap_params(self):
        for p in self.params.values():
            p.current = p.target

    def process(self, x: np.ndarray) -> np.ndarray:
        """Mono block in, (n, 2) stereo out; dry/wet per the mix param."""
        n = x.size
        rt60 = self.params["rt60_s"].block(n)
        feedback = self.params["feedback"].block(n)
        mix = self.params["mix"].block(n)
        wet_l = np.empty(n)
        wet_r = np.empty(n)
        breath_chain_kernel(
            x, rt60, feedback,
            self.comb_buf, self.comb_idx, self.comb_delay,
            self.ap_buf, self.ap_idx, self.ap_delay,
            self.fdn_buf, self.fdn_idx, self.fdn_delay, FDN_MATRIX,
            float(self.sample_rate), wet_l, wet_r)
        out = np.empty((n, 2))
        dry = (1.0 - mix) * x
        out[:, 0] = dry + mix * wet_l
        out[:, 1] = dry + mix * wet_r
        if not np.all(np.isfinite(out)):
            self.faults += 1
            self.reset()
            return np.zeros((n, 2))
        return out

    def reset(self):
        self.comb_buf[:] = 0.0
        self.ap_buf[:] = 0.0
        self.fdn_buf[:] = 0.0
