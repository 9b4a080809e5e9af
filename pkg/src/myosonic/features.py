"""EMG feature extraction: rectification, envelopes, MAV, calibration, levels.

The streaming pipeline per device is rectify -> windowed MAV (250 ms window,
50 ms hop at 200 Hz) -> normalize against a calibration profile -> classify
the aggregate into micro/meso/macro with hysteresis.
"""

from __future__ import annotations

import enum
import sys
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import numpy as np

from .ingest import EMG_RATE_HZ, N_CHANNELS, DeviceId, EmgFrame

WINDOW_SAMPLES = 50      # 250 ms at 200 Hz
HOP_SAMPLES = 10         # 50 ms -> 20 Hz feature rate
DEFAULT_TAU_S = 0.1
NORM_CEILING = 1.5       # headroom above measured MVC

LEVEL_MESO = 0.08        # aggregate MVC fraction; config-exposed
LEVEL_MACRO = 0.40
LEVEL_HYSTERESIS = 0.01


class Level(str, enum.Enum):
    MICRO = "micro"
    MESO = "meso"
    MACRO = "macro"


_LEVEL_ORDER = [Level.MICRO, Level.MESO, Level.MACRO]


def rectify(frame: EmgFrame) -> np.ndarray:
    """Full-wave rectification: per-channel absolute value."""
    return np.abs(np.asarray(frame.channels, dtype=np.float64))


class EnvelopeSmoother:
    """One-pole lowpass per channel: y += alpha * (x - y).

    alpha = 1 - exp(-1 / (tau * fs)); default tau 0.1 s at 200 Hz.
    """

    def __init__(self, tau_s: float = DEFAULT_TAU_S, fs: float = EMG_RATE_HZ):
        if tau_s <= 0:
            raise ValueError("tau_s must be > 0")
        self.alpha = 1.0 - np.exp(-1.0 / (tau_s * fs))
        self.state = np.zeros(N_CHANNELS)

    def step(self, rectified: np.ndarray) -> np.ndarray:
        self.state = self.state + self.alpha * (rectified - self.state)
        return self.state.copy()


def mav(window: np.ndarray) -> np.ndarray:
    """Mean absolute value per channel over a window of rectified vectors."""
    w = np.asarray(window, dtype=np.float64)
    return np.abs(w).mean(axis=0)


def rms(window: np.ndarray) -> np.ndarray:
    w = np.asarray(window, dtype=np.float64)
    return np.sqrt((w * w).mean(axis=0))


def waveform_length(window: np.ndarray) -> np.ndarray:
    w = np.asarray(window, dtype=np.float64)
    return np.abs(np.diff(w, axis=0)).sum(axis=0)


def zero_crossings(window: np.ndarray) -> np.ndarray:
    w = np.asarray(window, dtype=np.float64)
    return (np.diff(np.signbit(w), axis=0) != 0).sum(axis=0).astype(np.float64)


class CalibrationError(ValueError):
    pass


@dataclass
class DeviceCalibration:
    rest_baseline: np.ndarray  # (8,) rectified quantization units
    mvc_max: np.ndarray        # (8,)


@dataclass
class CalibrationProfile:
    devices: dict[DeviceId, DeviceCalibration]
    created_unix: float = field(default_factory=time.time)

    def for_device(self, device: DeviceId) -> DeviceCalibration:
        cal = self.devices.get(device)
        if cal is None:
            cal = _default_device_calibration()
        return cal

    def save(self, path):
        # repr of plain floats round-trips exactly and is valid TOML;
        # numpy scalars must be unwrapped first
        lines = [f"created_unix = {float(self.created_unix)!r}", ""]
        for device, cal in self.devices.items():
            lines.append(f"[{device.value}]")
            lines.append("rest_baseline = ["
                         + ", ".join(repr(float(v))
                                     for v in cal.rest_baseline) + "]")
            lines.append("mvc_max = ["
                         + ", ".join(repr(float(v))
                                     for v in cal.mvc_max) + "]")
            lines.append("")
        Path(path).write_text("\n".join(lines), encoding="utf-8")

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        if "created_unix" not in data:
            raise CalibrationError(f"{path}: missing created_unix")
        devices = {}
        for device in DeviceId:
            table = data.get(device.value)
            if table is None:
                continue
            rest = np.asarray(table["rest_baseline"], dtype=np.float64)
            mvc = np.asarray(table["mvc_max"], dtype=np.float64)
            if rest.shape != (N_CHANNELS,) or mvc.shape != (N_CHANNELS,):
                raise CalibrationError(f"{path}: [{device.value}] needs "
                                       f"{N_CHANNELS}-element arrays")
            _check_separation(device, rest, mvc)
            devices[device] = DeviceCalibration(rest, mvc)
        return cls(devices=devices, created_unix=float(data["created_unix"]))


def _default_device_calibration() -> DeviceCalibration:
    # Uncalibrated fallback: zero rest and a moderate ceiling so meso-level
    # activity still lands in a usable mapping range.
    return DeviceCalibration(rest_baseline=np.zeros(N_CHANNELS),
                             mvc_max=np.full(N_CHANNELS, 40.0))


def default_profile() -> CalibrationProfile:
    return CalibrationProfile(devices={d: _default_device_calibration()
                                       for d in DeviceId})


# Separation a valid calibration must show between rest and MVC.  Catches
# the degenerate case of feeding the same recording for both phases.
_MIN_SPAN_UNITS = 1.0
_MIN_SPAN_RATIO = 1.5


def _check_separation(device: DeviceId, rest: np.ndarray, mvc: np.ndarray):
    floor = np.maximum(rest + _MIN_SPAN_UNITS, rest * _MIN_SPAN_RATIO)
    bad = np.nonzero(mvc < floor)[0]
    if bad.size:
        ch = int(bad[0]) + 1
        raise CalibrationError(
            f"{device.value} ch{ch}: mvc_max {mvc[bad[0]]:.3f} does not exceed "
            f"rest baseline {rest[bad[0]]:.3f} by a usable margin")


def _mav_series(frames: list[EmgFrame]) -> np.ndarray:
    """Settled windowed MAVs over one device's frames, (hops, 8)."""
    data = np.abs(np.array([f.channels for f in frames], dtype=np.float64))
    rows = []
    for end in range(WINDOW_SAMPLES, len(data) + 1, HOP_SAMPLES):
        rows.append(data[end - WINDOW_SAMPLES:end].mean(axis=0))
    return np.array(rows)


def calibrate(rest_frames: list[EmgFrame], mvc_frames: list[EmgFrame],
              min_seconds: float = 3.0) -> CalibrationProfile:
    """Build a calibration profile from rest and MVC recordings.

    Per channel: rest_baseline is the median windowed MAV over the rest
    stream, mvc_max the 95th percentile over the MVC stream.
    """
    devices = {}
    by_device_rest = _split_by_device(rest_frames)
    by_device_mvc = _split_by_device(mvc_frames)
    if set(by_device_rest) != set(by_device_mvc):
        raise CalibrationError("rest and MVC streams cover different devices")
    min_frames = int(min_seconds * EMG_RATE_HZ)
    for device in by_device_rest:
        rest_f, mvc_f = by_device_rest[device], by_device_mvc[device]
        if len(rest_f) < min_frames or len(mvc_f) < min_frames:
            raise CalibrationError(
                f"{device.value}: need at least {min_seconds:.0f} s of frames "
                f"for both phases (got {len(rest_f)} rest, {len(mvc_f)} mvc)")
        rest = np.median(_mav_series(rest_f), axis=0)
        mvc = np.percentile(_mav_series(mvc_f), 95, axis=0)
        _check_separation(device, rest, mvc)
        devices[device] = DeviceCalibration(rest_baseline=rest, mvc_max=mvc)
    return CalibrationProfile(devices=devices)


def _split_by_device(frames):
    out: dict[DeviceId, list[EmgFrame]] = {}
    for f in frames:
        out.setdefault(f.device_id, []).append(f)
    return out


def normalize(mav_values: np.ndarray, cal: DeviceCalibration) -> np.ndarray:
    """Scale raw MAV into MVC units, clamped to [0, NORM_CEILING]."""
    span = cal.mvc_max - cal.rest_baseline
    out = (np.asarray(mav_values, dtype=np.float64) - cal.rest_baseline) / span
    return np.clip(out, 0.0, NORM_CEILING)


class LevelClassifier:
    """Three-level regime classifier with sticky downward hysteresis.

    Promotion happens at the raw threshold; demotion requires dropping
    `hysteresis` below it, so a signal oscillating inside a 0.01-wide band
    never chatters.
    """

    def __init__(self, meso_at: float = LEVEL_MESO, macro_at: float = LEVEL_MACRO,
                 hysteresis: float = LEVEL_HYSTERESIS):
        self.bounds = (meso_at, macro_at)
        self.hysteresis = hysteresis
        self.level = Level.MICRO

    def classify(self, aggregate: float) -> Level:
        raw = self._raw(aggregate)
        if _LEVEL_ORDER.index(raw) >= _LEVEL_ORDER.index(self.level):
            self.level = raw
            return raw
        # Demote one step at a time, only past the hysteresis margin.
        level = self.level
        while level != Level.MICRO:
            lower = self.bounds[_LEVEL_ORDER.index(level) - 1]
            if aggregate < lower - self.hysteresis:
                level = _LEVEL_ORDER[_LEVEL_ORDER.index(level) - 1]
            else:
                break
        self.level = level
        return level

    def _raw(self, x: float) -> Level:
        if x < self.bounds[0]:
            return Level.MICRO
        if x < self.bounds[1]:
            return Level.MESO
        return Level.MACRO


@dataclass(frozen=True)
class FeatureVector:
    device_id: DeviceId
    timestamp_us: int                 # newest sample in the window
    mav_per_channel: tuple[float, ...]  # normalized MVC units, [0, 1.5]
    mav_aggregate: float
    level: Level
    warm_up: bool = False             # window not yet full
    overshoot: bool = False           # any channel above 1.0 MVC


class FeatureExtractor:
    """Streaming per-device feature pipeline. push() yields a FeatureVector
    on every hop boundary; warm-up hops (partial window) are flagged."""

    def __init__(self, device: DeviceId, calibration: DeviceCalibration | None = None,
                 window: int = WINDOW_SAMPLES, hop: int = HOP_SAMPLES,
                 meso_at: float = LEVEL_MESO, macro_at: float = LEVEL_MACRO,
                 hysteresis: float = LEVEL_HYSTERESIS):
        self.device = device
        self.cal = calibration if calibration is not None else _default_device_calibration()
        self.window = window
        self.hop = hop
        self._buf: deque = deque(maxlen=window)
        self._sum = np.zeros(N_CHANNELS)
        self._count = 0
        self._hops_since_refresh = 0
        self.classifier = LevelClassifier(meso_at, macro_at, hysteresis)

    def push(self, frame: EmgFrame):
        if frame.device_id != self.device:
            raise ValueError(f"frame for {frame.device_id.value} fed to "
                             f"{self.device.value} extractor")
        x = rectify(frame)
        if len(self._buf) == self.window:
            self._sum -= self._buf[0]
        self._buf.append(x)
        self._sum += x
        self._count += 1
        if self._count % self.hop != 0:
            return None
        self._hops_since_refresh += 1
        if self._hops_since_refresh >= self.window:
            # Periodic exact refresh bounds float drift of the running sum.
            self._sum = np.sum(np.asarray(self._buf), axis=0)
            self._hops_since_refresh = 0
        raw_mav = self._sum / len(self._buf)
        norm = normalize(raw_mav, self.cal)
        aggregate = float(norm.mean())
        return FeatureVector(
            device_id=self.device,
            timestamp_us=frame.timestamp_us,
            mav_per_channel=tuple(float(v) for v in norm),
            mav_aggregate=aggregate,
            level=self.classifier.classify(aggregate),
            warm_up=len(self._buf) < self.window,
            overshoot=bool((norm > 1.0).any()),
        )


ANALYZE_HEADER = ("timestamp_us,device,"
                  + ",".join(f"mav{i}" for i in range(1, 9))
                  + ",mav_agg,level")


def analyze_frames(frames: list[EmgFrame],
                   profile: CalibrationProfile | None = None) -> list[FeatureVector]:
    """Offline feature pass over a replay stream; settled hops only."""
    profile = profile or default_profile()
    extractors = {}
    out = []
    for frame in frames:
        ex = extractors.get(frame.device_id)
        if ex is None:
            ex = extractors[frame.device_id] = FeatureExtractor(
                frame.device_id, profile.for_device(frame.device_id))
        fv = ex.push(frame)
        if fv is not None and not fv.warm_up:
            out.append(fv)
    out.sort(key=lambda fv: (fv.timestamp_us, fv.device_id.value))
    return out


def write_feature_csv(features: list[FeatureVector], path):
    rows = [ANALYZE_HEADER]
    for fv in sorted(features, key=lambda fv: (fv.timestamp_us, fv.device_id.value)):
        rows.append(f"{fv.timestamp_us},{fv.device_id.value},"
                    + ",".join(f"{v:.10g}" for v in fv.mav_per_channel)
                    + f",{fv.mav_aggregate:.10g},{fv.level.value}")
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")
