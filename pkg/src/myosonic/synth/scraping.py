"""Scraping voice: short filtered-noise grains at a velocity-driven rate,
resonated through three fixed modes."""

from __future__ import annotations

import numpy as np
from scipy.signal import lfilter, sosfilt

from .base import OverlapAdder, SoundObject, soft_limit

GRAIN_RATE_MAX_HZ = 200.0
GRAIN_MS_MIN = 1.0
GRAIN_MS_SPAN = 19.0
RES_FREQS_HZ = (520.0, 1190.0, 2150.0)
RES_DECAY_S = (0.05, 0.04, 0.03)
RES_AMPS = (0.5, 0.35, 0.25)


def _resonator_sos(sample_rate: float) -> np.ndarray:
    rows = []
    for f, tau, amp in zip(RES_FREQS_HZ, RES_DECAY_S, RES_AMPS):
        r = np.exp(-1.0 / (tau * sample_rate))
        w = 2.0 * np.pi * f / sample_rate
        b0 = amp * (1.0 - r ** 2) * np.sin(w)
        rows.append([b0, 0.0, 0.0, 1.0, -2.0 * r * np.cos(w), r ** 2])
    return np.asarray(rows)


class Scraping(SoundObject):
    OBJECT_ID = "scraping"
    PARAMS = {
        "force": (0.0, 1.0, 0.0),
        "grain": (0.0, 1.0, 0.3),
        "velocity": (0.0, 1.0, 0.0),
    }

    def __init__(self, sample_rate: int, seed: int = 0):
        super().__init__(sample_rate, seed)
        self.sos = _resonator_sos(float(sample_rate))
        self.zi = np.zeros((self.sos.shape[0], 2))
        self.ola = OverlapAdder()
        self.onset_count = 0

    def _render(self, n: int) -> np.ndarray:
        force = self.param_block("force", n)
        grain = self.param_block("grain", n)
        velocity = self.param_block("velocity", n)
        rate = GRAIN_RATE_MAX_HZ * float(np.mean(velocity))
        count = int(self.rng.poisson(rate * n / self.sample_rate))
        if count > 0:
            dur_ms = GRAIN_MS_MIN + GRAIN_MS_SPAN * grain[-1]
            length = max(2, int(round(dur_ms * 1e-3 * self.sample_rate)))
            window = np.hanning(length)
            # brighter noise for short grains
            lp = 0.15 + 0.75 * grain[-1]
            offsets = self.rng.integers(0, n, count)
            amp = 0.8 * force[-1]
            for off in offsets:
                noise = self.rng.uniform(-1.0, 1.0, length)
                filt = lfilter([1.0 - lp], [1.0, -lp], noise)
                self.ola.add(amp * window * filt, int(off))
            self.onset_count += count
        exc = self.ola.pop(n)
        res, self.zi = sosfilt(self.sos, exc, zi=self.zi)
        return soft_limit(exc * 0.2 + res)

    def reset(self):
        self.zi = np.zeros((self.sos.shape[0], 2))
        self.ola.clear()
