"""Stochastic bubble stream: Poisson onsets over log-uniform radii,
post-processed by a scrubbed delay."""

from __future__ import annotations

import math

import numpy as np

from .base import OverlapAdder, SoundObject, soft_limit
from .bubble import bubble_render
from .scrub import ScrubDelay

BASE_RATE_HZ = 2.0
RATE_SPAN_HZ = 198.0
STREAM_RISE = 0.5
STREAM_AMP = 0.22


def onset_rate_hz(density: float, speed: float) -> float:
    """lambda = 2 + 198 * density * speed, bubbles per second."""
    return BASE_RATE_HZ + RATE_SPAN_HZ * density * speed


class FluidFlow(SoundObject):
    OBJECT_ID = "fluidflow"
    PARAMS = {
        "speed": (0.0, 1.0, 0.0),
        "density": (0.0, 1.0, 0.3),
        "radius_min_m": (0.0005, 0.02, 0.001),
        "radius_max_m": (0.0005, 0.02, 0.008),
        "scrub_amount": (0.0, 1.0, 0.0),
    }

    def __init__(self, sample_rate: int, seed: int = 0):
        super().__init__(sample_rate, seed)
        self.ola = OverlapAdder()
        self.scrub = ScrubDelay(sample_rate)
        self.onset_count = 0

    def _render(self, n: int) -> np.ndarray:
        speed = self.param_block("speed", n)
        density = self.param_block("density", n)
        r_min = self.param_block("radius_min_m", n)[-1]
        r_max = self.param_block("radius_max_m", n)[-1]
        scrub_amount = self.param_block("scrub_amount", n)
        lo = min(r_min, r_max)
        hi = max(lo * 1.0001, max(r_min, r_max))
        lam = onset_rate_hz(float(np.mean(density)), float(np.mean(speed)))
        count = int(self.rng.poisson(lam * n / self.sample_rate))
        if count > 0:
            offsets = self.rng.integers(0, n, count)
            radii = np.exp(self.rng.uniform(
                math.log(lo), math.log(hi), count))
            for off, r in zip(offsets, radii):
                event, _ = bubble_render(
                    r, STREAM_RISE, STREAM_AMP * r / hi, self.sample_rate)
                self.ola.add(event, int(off))
            self.onset_count += count
        raw = soft_limit(self.ola.pop(n))
        return self.scrub.process(raw, scrub_amount)

    def reset(self):
        self.ola.clear()
        self.scrub.reset()
