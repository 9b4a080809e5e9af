"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from myosonic.ingest import DeviceId, EmgFrame, record_frames, synth_emg

FRAME_PERIOD_US = 5000


def frames_from_array(values: np.ndarray,
                      device: DeviceId = DeviceId.LEFT_ARM,
                      t0_us: int = 0) -> list[EmgFrame]:
    """Wrap an (n, 8) int array as a timestamped frame stream."""
    values = np.asarray(values)
    return [
        EmgFrame(device_id=device, timestamp_us=t0_us + i * FRAME_PERIOD_US,
                 channels=tuple(int(v) for v in row))
        for i, row in enumerate(values)
    ]


def random_frames(rng: np.random.Generator, n: int,
                  device: DeviceId = DeviceId.LEFT_ARM) -> list[EmgFrame]:
    return frames_from_array(rng.integers(-128, 128, size=(n, 8)), device)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0xC0FFEE)


@pytest.fixture
def replay_path(tmp_path):
    """A short two-device replay file on disk."""
    frames = sorted(
        synth_emg("meso", seed=7, duration_s=1.0, device=DeviceId.LEFT_ARM)
        + synth_emg("micro", seed=7, duration_s=1.0, device=DeviceId.RIGHT_CALF),
        key=lambda f: (f.timestamp_us, f.device_id.value),
    )
    path = tmp_path / "replay.csv"
    record_frames(frames, path)
    return path
