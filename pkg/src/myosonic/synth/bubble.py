"""Single bubble: exponentially decaying sine at the Minnaert resonance
of an air bubble in water, with an optional upward pitch chirp."""

from __future__ import annotations

import math

import numpy as np

from .base import OverlapAdder, SoundObject, soft_limit

RADIUS_RANGE = (0.0005, 0.02)  # meters
F_COEFF = 3.0      # f0 = 3 / radius  (Minnaert, Hz * m)
DAMP_COEFF = 0.13  # d = 0.13 / radius (1/s * m)
TRIGGER_LEVEL = 0.05
MAX_EVENT_S = 2.0


def bubble_render(radius_m: float, rise: float, amplitude: float,
                  sample_rate: int,
                  max_len_s: float = MAX_EVENT_S) -> tuple[np.ndarray, bool]:
    """Synthesize one bubble event; returns (samples, radius_was_clamped).

    freq(t) = f0 * (1 + rise * d * t * 0.1), amplitude decays as
    exp(-d t). The event is truncated at -60 dB of the decay or at
    max_len_s, whichever comes first.
    """
    clamped = not (RADIUS_RANGE[0] <= radius_m <= RADIUS_RANGE[1])
    r = min(RADIUS_RANGE[1], max(RADIUS_RANGE[0], float(radius_m)))
    f0 = F_COEFF / r
    d = DAMP_COEFF / r
    dur = min(max_len_s, math.log(1000.0) / d)
    n = max(1, int(round(dur * sample_rate)))
    t = np.arange(n) / sample_rate
    # phase = 2*pi * integral of f0 * (1 + c*t) dt, c = rise * d * 0.1
    c = rise * d * 0.1
    phase = 2.0 * math.pi * f0 * (t + 0.5 * c * t * t)
    return amplitude * np.sin(phase) * np.exp(-d * t), clamped


class Bubble(SoundObject):
    """Event-triggered voice: each upward crossing of the amplitude
    parameter through the trigger level fires one bubble."""

    OBJECT_ID = "bubble"
    PARAMS = {
        "radius_m": (RADIUS_RANGE[0], RADIUS_RANGE[1], 0.003),
        "rise": (0.0, 1.0, 0.5),
        "amplitude": (0.0, 1.0, 0.0),
    }

    def __init__(self, sample_rate: int, seed: int = 0):
        super().__init__(sample_rate, seed)
        self.ola = OverlapAdder()
        self._armed = True
        self.clamp_count = 0

    def _render(self, n: int) -> np.ndarray:
        amp = self.param_block("amplitude", n)
        radius = self.param_block("radius_m", n)
        rise = self.param_block("rise", n)
        level = amp[-1]
        if self._armed and level >= TRIGGER_LEVEL:
            event, clamped = bubble_render(
                radius[-1], rise[-1], level, self.sample_rate)
            if clamped:
                self.clamp_count += 1
            self.ola.add(event, 0)
            self._armed = False
        elif level < TRIGGER_LEVEL:
            self._armed = True
        return soft_limit(self.ola.pop(n))

    def reset(self):
        self.ola.clear()
        self._armed = True
