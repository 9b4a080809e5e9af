"""Rubbed-surface friction voice: a bristle model excites a tunable
narrow-Q resonant surface whose center frequency steers the squeak
pitch; a fixed modal bank colors the radiated sound."""

from __future__ import annotations

import math

import numpy as np

from .base import SoundObject, soft_limit
from .kernels import friction_kernel

MODE_FREQS_HZ = (185.0, 420.0, 835.0, 1340.0, 2350.0)
MODE_DECAY_S = (0.12, 0.09, 0.07, 0.05, 0.035)
MODE_AMPS = (1.0, 0.7, 0.5, 0.4, 0.3)
FEEDBACK_GAIN = 0.006
OUT_GAIN = 300.0


class Friction(SoundObject):
    OBJECT_ID = "friction"
    PARAMS = {
        "force": (0.0, 1.0, 0.0),
        "pressure": (0.0, 1.0, 0.5),
        "stiffness": (0.0, 1.0, 0.5),
        "dissipation": (0.0, 1.0, 0.3),
        "velocity": (-1.0, 1.0, 0.0),
        "bandpass_fc_hz": (80.0, 2500.0, 800.0),
    }

    def __init__(self, sample_rate: int, seed: int = 0):
        super().__init__(sample_rate, seed)
        sr = float(sample_rate)
        w = 2.0 * math.pi * np.asarray(MODE_FREQS_HZ) / sr
        self.mode_r = np.exp(-1.0 / (np.asarray(MODE_DECAY_S) * sr))
        self.mode_cosw = np.cos(w)
        # normalize each mode to roughly unit peak gain, then scale
        self.mode_b0 = (np.asarray(MODE_AMPS)
                        * (1.0 - self.mode_r ** 2) * np.sin(w))
        self.mode_y1 = np.zeros(len(MODE_FREQS_HZ))
        self.mode_y2 = np.zeros(len(MODE_FREQS_HZ))
        self.bp_state = np.zeros(4)
        self.z = 0.0

    def _render(self, n: int) -> np.ndarray:
        out = np.empty(n)
        self.z = friction_kernel(
            self.param_block("force", n),
            self.param_block("pressure", n),
            self.param_block("stiffness", n),
            self.param_block("dissipation", n),
            self.param_block("velocity", n),
            self.param_block("bandpass_fc_hz", n),
            self.z, self.mode_r, self.mode_cosw, self.mode_b0,
            self.mode_y1, self.mode_y2, self.bp_state,
            FEEDBACK_GAIN, float(self.sample_rate), out)
        return soft_limit(OUT_GAIN * out)

    def reset(self):
        self.mode_y1[:] = 0.0
        self.mode_y2[:] = 0.0
        self.bp_state[:] = 0.0
        self.z = 0.0
