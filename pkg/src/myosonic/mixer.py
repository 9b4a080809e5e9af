"""Virtual mixer: per-object strips with gain, equal-power pan, breath
send and mute, summed to a stereo master with slope-limited ramps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .control import ControlError, ControlEvent, parse_address

GAIN_DB_MIN = -60.0
GAIN_DB_MAX = 6.0
RAMP_S = 0.010


def pan_gains(pan: float) -> tuple[float, float]:
    """Equal-power law: gL = cos((pan+1)*pi/4), gR = sin((pan+1)*pi/4)."""
    p = min(1.0, max(-1.0, float(pan)))
    a = (p + 1.0) * math.pi / 4.0
    return math.cos(a), math.sin(a)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 20.0)


@dataclass(frozen=True)
class StripState:
    gain_db: float = 0.0
    pan: float = 0.0
    send_breath: float = 0.0
    mute: bool = False

    def clamped(self) -> "StripState":
        return StripState(
            gain_db=min(GAIN_DB_MAX, max(GAIN_DB_MIN, self.gain_db)),
            pan=min(1.0, max(-1.0, self.pan)),
            send_breath=min(1.0, max(0.0, self.send_breath)),
            mute=bool(self.mute))


@dataclass(frozen=True)
class MixerState:
    strips: dict[str, StripState] = field(default_factory=dict)
    master_gain_db: float = 0.0


def apply_control(state: MixerState, ev: ControlEvent) -> MixerState:
    """New state with the addressed field set (clamped); raises
    ControlError for addresses outside the mixer namespace."""
    parsed = parse_address(ev.address)
    if parsed is None:
        raise ControlError(f"unknown control address: {ev.address}")
    if parsed[0] == "master":
        gain = min(GAIN_DB_MAX, max(GAIN_DB_MIN, float(ev.value)))
        return replace(state, master_gain_db=gain)
    if parsed[0] != "strip":
        raise ControlError(f"not a mixer address: {ev.address}")
    _, obj, fld = parsed
    if obj not in state.strips:
        raise ControlError(f"unknown mixer strip: {obj}")
    strip = state.strips[obj]
    if fld == "mute":
        strip = replace(strip, mute=float(ev.value) >= 0.5)
    else:
        strip = replace(strip, **{fld: float(ev.value)})
    strips = dict(state.strips)
    strips[obj] = strip.clamped()
    return replace(state, strips=strips)


class _Sloped:
    """Scalar tracker whose value moves to a target at a slope fixed when
    the target is set: at most |step|/(ramp_s * sample_rate) per sample."""

    def __init__(self, value: float, sample_rate: int):
        self.value = float(value)
        self.target = float(value)
        self.slope = 0.0
        self.ramp_samples = max(1, int(round(RAMP_S * sample_rate)))

    def set_target(self, target: float):
        target = float(target)
        if target != self.target:
            self.target = target
            self.slope = (target - self.value) / self.ramp_samples

    def block(self, n: int) -> np.ndarray:
        if self.value == self.target:
            return np.full(n, self.value)
        seq = self.value + self.slope * np.arange(1, n + 1)
        if self.slope > 0:
            np.minimum(seq, self.target, out=seq)
        else:
            np.maximum(seq, self.target, out=seq)
        self.value = float(seq[-1])
        return seq


class _StripRunner:
    def __init__(self, sample_rate: int):
        self.gain = _Sloped(1.0, sample_rate)     # linear domain
        self.pan = _Sloped(0.0, sample_rate)
        self.send = _Sloped(0.0, sample_rate)
        self.mute = False


@dataclass
class StripMeter:
    peak: float = 0.0
    rms: float = 0.0


class Mixer:
    """Audio-context mixer; targets follow the last MixerState synced in."""

    def __init__(self, object_ids: list[str], sample_rate: int):
        self.sample_rate = int(sample_rate)
        self.strips = {oid: _StripRunner(sample_rate) for oid in object_ids}
        self.master = _Sloped(1.0, sample_rate)
        self._default_state = MixerState(
            strips={oid: StripState() for oid in object_ids})
        self.sync_targets(self._default_state)
        self.snap()

    def sync_targets(self, state: MixerState):
        for oid, strip in state.strips.items():
            runner = self.strips.get(oid)
            if runner is None:
                continue
            runner.gain.set_target(db_to_linear(strip.gain_db))
            runner.pan.set_target(strip.pan)
            runner.send.set_target(strip.send_breath)
            runner.mute = strip.mute
        self.master.set_target(db_to_linear(state.master_gain_db))

    def snap(self):
        """Jump every ramp to its target (startup / offline scene cuts)."""
        for runner in self.strips.values():
            for s in (runner.gain, runner.pan, runner.send):
                s.value = s.target
                s.slope = 0.0
        self.master.value = self.master.target

    def mix(self, blocks: dict[str, np.ndarray],
            fx_return: np.ndarray | None = None,
            ) -> tuple[np.ndarray, np.ndarray, dict[str, StripMeter]]:
        """Sum strip blocks -> ((n,2) master, (n,) breath send bus, meters).

        Meters are post-gain, pre-pan. A muted strip contributes exact
        zeros and still advances its ramps. fx_return is a stereo bus
        return added before the master fader (the engine feeds back the
        previous block's breath-chain output here).
        """
        sizes = {b.size for b in blocks.values()}
        if len(sizes) > 1:
            raise ValueError(f"mixer block length mismatch: {sorted(sizes)}")
        n = sizes.pop() if sizes else 0
        left = np.zeros(n)
        right = np.zeros(n)
        send_bus = np.zeros(n)
        meters: dict[str, StripMeter] = {}
        for oid, x in blocks.items():
            runner = self.strips[oid]
            gain = runner.gain.block(n)
            pan = runner.pan.block(n)
            send = runner.send.block(n)
            if runner.mute:
                meters[oid] = StripMeter()
                continue
            post = x * gain
            angle = (pan + 1.0) * (math.pi / 4.0)
            left += post * np.cos(angle)
            right += post * np.sin(angle)
            send_bus += post * send
            meters[oid] = StripMeter(
                peak=float(np.max(np.abs(post))) if n else 0.0,
                rms=float(np.sqrt(np.mean(post * post))) if n else 0.0)
        if fx_return is not None:
            left = left + fx_return[:, 0]
            right = right + fx_return[:, 1]
        master = self.master.block(n)
        out = np.empty((n, 2))
        out[:, 0] = left * master
        out[:, 1] = right * master
        return out, send_bus, meters
