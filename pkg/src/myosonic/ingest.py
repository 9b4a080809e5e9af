"""EMG frame acquisition: live OSC/UDP, replay files, synthetic generator.

Replay CSV format:
    timestamp_us,device,ch1,ch2,ch3,ch4,ch5,ch6,ch7,ch8
    ...data rows...
    # end

The trailing comment line marks a cleanly closed recording; its absence
flags a partial file.
"""

from __future__ import annotations

import enum
import socket
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal
from scipy.io import wavfile

EMG_RATE_HZ = 200
FRAME_PERIOD_US = 1_000_000 // EMG_RATE_HZ
N_CHANNELS = 8

REPLAY_HEADER = "timestamp_us,device," + ",".join(f"ch{i}" for i in range(1, 9))
END_MARKER = "# end"

# Synthetic generator noise levels, in rectified quantization units.
SYNTH_SIGMA = {"rest": 1.0, "micro": 5.0, "meso": 25.0, "macro": 60.0}
SYNTH_BAND_HZ = (20.0, 95.0)


class DeviceId(str, enum.Enum):
    LEFT_ARM = "left_arm"
    RIGHT_CALF = "right_calf"


@dataclass(frozen=True)
class EmgFrame:
    device_id: DeviceId
    timestamp_us: int
    channels: tuple[int, ...]

    def __post_init__(self):
        if len(self.channels) != N_CHANNELS:
            raise ValueError(f"expected {N_CHANNELS} channels, got {len(self.channels)}")
        for v in self.channels:
            if not -128 <= v <= 127:
                raise ValueError(f"channel value {v} outside [-128, 127]")


@dataclass(frozen=True)
class BreathFrame:
    timestamp_us: int
    samples: np.ndarray  # mono, normalized floats at engine rate


class ReplayError(ValueError):
    """Replay file unreadable or violating the format contract."""


def replay_frames(path) -> list[EmgFrame]:
    """Load and validate a replay CSV. Offline delivery: the whole list at once.

    Raises ReplayError naming the offending data row for a bad header,
    unparseable row, or a per-device timestamp regression.
    """
    path = Path(path)
    if not path.exists():
        raise ReplayError(f"replay file not found: {path}")
    frames: list[EmgFrame] = []
    last_ts: dict[DeviceId, int] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != REPLAY_HEADER:
            raise ReplayError(f"{path}: bad header (expected {REPLAY_HEADER!r})")
        row = 0
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            row += 1
            parts = line.split(",")
            if len(parts) != 2 + N_CHANNELS:
                raise ReplayError(f"{path}: row {row} (line {lineno}): expected "
                                  f"{2 + N_CHANNELS} fields, got {len(parts)}")
            try:
                ts = int(parts[0])
                device = DeviceId(parts[1])
                channels = tuple(int(v) for v in parts[2:])
                frame = EmgFrame(device_id=device, timestamp_us=ts, channels=channels)
            except ValueError as e:
                raise ReplayError(f"{path}: row {row} (line {lineno}): {e}") from e
            prev = last_ts.get(device)
            if prev is not None and ts <= prev:
                raise ReplayError(
                    f"{path}: row {row} (line {lineno}): non-monotonic timestamp "
                    f"for {device.value} ({ts} after {prev})")
            last_ts[device] = ts
            frames.append(frame)
    frames.sort(key=lambda f: f.timestamp_us)
    return frames


def replay_is_complete(path) -> bool:
    """True when the file ends with the clean-shutdown end marker."""
    lines = Path(path).read_text(encoding="utf-8").rstrip("\n").rsplit("\n", 1)
    return bool(lines) and lines[-1].strip() == END_MARKER


def iter_paced(frames, speed: float = 1.0):
    """Live-simulation delivery: yield frames paced by their timestamp deltas."""
    start = time.perf_counter()
    t0 = frames[0].timestamp_us if frames else 0
    for frame in frames:
        due = start + (frame.timestamp_us - t0) / 1e6 / speed
        delay = due - time.perf_counter()
        if delay > 0:
            time.sleep(delay)
        yield frame


class RecordWriter:
    """Streams frames to a replay CSV; close() appends the end marker."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "w", encoding="utf-8")
        self._fh.write(REPLAY_HEADER + "\n")
        self.count = 0

    def write(self, frame: EmgFrame):
        self._fh.write(f"{frame.timestamp_us},{frame.device_id.value},"
                       + ",".join(str(c) for c in frame.channels) + "\n")
        self.count += 1

    def close(self) -> int:
        if not self._fh.closed:
            self._fh.write(END_MARKER + "\n")
            self._fh.close()
        return self.count

    def abort(self):
        # Leaves the file without its end marker: flagged partial.
        if not self._fh.closed:
            self._fh.close()


def record_frames(frames, path) -> int:
    """Write a finite frame stream to a replay CSV. Returns frames written."""
    writer = RecordWriter(path)
    for frame in frames:
        writer.write(frame)
    return writer.close()


def synth_emg(profile: str, seed: int, duration_s: float,
              device: DeviceId = DeviceId.LEFT_ARM) -> list[EmgFrame]:
    """Deterministic synthetic EMG: band-limited noise scaled per profile.

    Profiles rest/micro/meso/macro target channel sigma of 1/5/25/60
    quantization units (before int8 clipping), band-shaped to 20-95 Hz.
    """
    if profile not in SYNTH_SIGMA:
        raise ValueError(f"unknown profile {profile!r} (want one of {sorted(SYNTH_SIGMA)})")
    if duration_s <= 0:
        raise ValueError("duration_s must be > 0")
    n = int(round(duration_s * EMG_RATE_HZ))
    rng = np.random.default_rng(np.random.SeedSequence((seed, _device_key(device))))
    white = rng.standard_normal((n + 400, N_CHANNELS))
    sos = signal.butter(4, SYNTH_BAND_HZ, btype="bandpass", fs=EMG_RATE_HZ, output="sos")
    shaped = signal.sosfilt(sos, white, axis=0)[400:]  # drop filter warm-up
    shaped *= SYNTH_SIGMA[profile] / np.std(shaped)
    quantized = np.clip(np.rint(shaped), -128, 127).astype(np.int64)
    return [
        EmgFrame(device_id=device, timestamp_us=i * FRAME_PERIOD_US,
                 channels=tuple(int(v) for v in quantized[i]))
        for i in range(n)
    ]


def _device_key(device: DeviceId) -> int:
    import zlib
    return zlib.crc32(device.value.encode())


def load_breath_wav(path, target_rate: int) -> np.ndarray:
    """Load a mono PCM/float WAV and resample to the engine rate.

    Resampling uses a linear-phase windowed-sinc FIR (kaiser beta 9,
    ~90 dB stopband) so file-based tests are rate-agnostic.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"breath file not found: {path}")
    rate, data = wavfile.read(path)
    if data.ndim > 1:
        data = data.mean(axis=1)
    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        x = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        x = data.astype(np.float64)
    else:
        raise ValueError(f"unsupported WAV sample format {data.dtype}")
    if rate != target_rate:
        from math import gcd
        g = gcd(int(rate), int(target_rate))
        x = signal.resample_poly(x, target_rate // g, rate // g,
                                 window=("kaiser", 9.0))
    return x


class OscReceiver:
    """UDP listener feeding parsed frames/events into shared deques.

    Single producer; the engine drains the deques from its own context.
    """

    def __init__(self, port: int, bind: str = "127.0.0.1",
                 timestamp_mode: str = "receipt"):
        from .osc import OscPacketParser
        if timestamp_mode not in ("receipt", "sequence"):
            raise ValueError("timestamp_mode must be 'receipt' or 'sequence'")
        self.port = port
        self.bind = bind
        self.timestamp_mode = timestamp_mode
        self.parser = OscPacketParser()
        self.frames: deque = deque()
        self.events: deque = deque()
        self._seq: dict[DeviceId, int] = {}
        self._sock = None
        self._thread = None
        self._stop = threading.Event()
        self._t0 = None

    def start(self):
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._sock.bind((self.bind, self.port))
        self._sock.settimeout(0.05)
        self.port = self._sock.getsockname()[1]
        self._t0 = time.monotonic_ns()
        self._thread = threading.Thread(target=self._run, name="osc-receiver",
                                        daemon=True)
        self._thread.start()
        return self

    def _now_us(self) -> int:
        return (time.monotonic_ns() - self._t0) // 1000

    def _run(self):
        while not self._stop.is_set():
            try:
                packet, _ = self._sock.recvfrom(4096)
            except socket.timeout:
                continue
            except OSError:
                break
            result = self.parser.parse(packet, self._now_us())
            if isinstance(result, EmgFrame):
                if self.timestamp_mode == "sequence":
                    # Nominal 200 Hz cadence per device; deterministic stamps
                    # for loopback/equivalence harnesses.
                    n = self._seq.get(result.device_id, 0)
                    self._seq[result.device_id] = n + 1
                    result = EmgFrame(device_id=result.device_id,
                                      timestamp_us=n * FRAME_PERIOD_US,
                                      channels=result.channels)
                self.frames.append(result)
            elif result is not None:
                self.events.append(result)

    def stop(self):
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
        if self._sock is not None:
            self._sock.close()
