"""Scrubbed delay: slow sinusoidal modulation of a long delay read head."""

from __future__ import annotations

import numpy as np

from .kernels import scrub_kernel

CENTER_MAX_S = 0.250
DEPTH_MAX_S = 0.010
WET_MAX = 0.5
LFO_HZ = 0.3


class ScrubDelay:
    """amount in [0, 1] scales delay center (0..250 ms), modulation depth
    (0..10 ms) and wet mix (0..0.5) together; amount 0 is an exact bypass."""

    def __init__(self, sample_rate: int):
        self.sample_rate = int(sample_rate)
        size = int((CENTER_MAX_S + DEPTH_MAX_S) * sample_rate) + 4
        self.buf = np.zeros(size)
        self.widx = 0
        self.lfo_phase = 0.0
        self.lfo_inc = LFO_HZ / sample_rate

    def process(self, x: np.ndarray, amount: np.ndarray) -> np.ndarray:
        out = np.empty_like(x)
        self.widx, self.lfo_phase = scrub_kernel(
            x, amount * CENTER_MAX_S, amount * DEPTH_MAX_S, amount * WET_MAX,
            self.buf, self.widx, self.lfo_phase, self.lfo_inc,
            float(self.sample_rate), out)
        return out

    def reset(self):
        self.buf[:] = 0.0
        self.widx = 0
        self.lfo_phase = 0.0
