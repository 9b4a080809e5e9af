"""Block scheduler tying ingestion -> features -> mapping -> synthesis ->
mixer, plus offline rendering and the live loop."""

from __future__ import annotations

import math
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .config import EngineConfig
from .control import (BREATH_FX_FIELDS, ControlError, ControlEvent, Source,
                      parse_address, translate_midi)
from .features import (CalibrationProfile, FeatureExtractor, FeatureVector,
                       Level, analyze_frames, default_profile)
from .ingest import (DeviceId, OscReceiver, RecordWriter, load_breath_wav,
                     replay_frames)
from .mapping import FeatureState, Scene, apply_curve, clamp_to_schema
from .mixer import Mixer, MixerState, StripState, apply_control
from .synth import OBJECT_CLASSES, BreathChain, Nonlinear, parameter_schema


@dataclass
class RenderReport:
    out_path: str
    sample_rate: int
    block_size: int
    seed: int
    duration_s: float
    blocks: int
    fault_count: int
    peak: float
    rtf: float
    scene_timeline: list[tuple[float, str]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def peak_dbfs(self) -> float:
        return 20.0 * math.log10(self.peak) if self.peak > 0 else -math.inf

    def format_text(self) -> str:
        timeline = "; ".join(f"{t:.3f}s {name}"
                             for t, name in self.scene_timeline)
        lines = [
            "render report",
            f"out: {self.out_path}",
            f"sample_rate: {self.sample_rate}",
            f"block_size: {self.block_size}",
            f"seed: {self.seed}",
            f"duration_s: {self.duration_s:.6f}",
            f"blocks: {self.blocks}",
            f"scene_timeline: {timeline}",
            f"fault_count: {self.fault_count}",
            f"peak_dbfs: {self.peak_dbfs:.2f}",
            f"real_time_factor: {self.rtf:.4f}",
        ]
        lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines) + "\n"


@dataclass
class _Transition:
    scene: Scene
    old_values: dict[str, float]
    t0_us: float
    dur_us: float


def _fade_state(scene: Scene) -> MixerState:
    """Mixer targets during a crossfade: inactive or to-be-muted strips
    head to the gain floor unmuted; hard mute lands at completion."""
    strips = {}
    for oid, strip in scene.mixer_snapshot.strips.items():
        if oid not in scene.active_objects or strip.mute:
            strips[oid] = StripState(gain_db=-60.0, pan=strip.pan,
                                     send_breath=strip.send_breath,
                                     mute=False)
        else:
            strips[oid] = strip
    return MixerState(strips=strips,
                      master_gain_db=scene.mixer_snapshot.master_gain_db)


def _settle_state(scene: Scene) -> MixerState:
    strips = {}
    for oid, strip in scene.mixer_snapshot.strips.items():
        if oid not in scene.active_objects:
            strips[oid] = StripState(gain_db=-60.0, pan=strip.pan,
                                     send_breath=strip.send_breath, mute=True)
        else:
            strips[oid] = strip
    return MixerState(strips=strips,
                      master_gain_db=scene.mixer_snapshot.master_gain_db)


class Engine:
    """Single-owner audio graph advanced one block at a time.

    Offline and live modes share this class; live wraps it in a paced
    loop, offline drives it directly so renders are bit-reproducible.
    """

    def __init__(self, config: EngineConfig,
                 profile: CalibrationProfile | None = None):
        self.config = config
        self.sample_rate = config.sample_rate
        self.block_size = config.block_size
        self.seed = config.seed if config.seed is not None else 0
        self.profile = profile or default_profile()
        self.schema = parameter_schema()
        self.objects = {}
        for oid, cls in OBJECT_CLASSES.items():
            if cls is Nonlinear:
                self.objects[oid] = cls(self.sample_rate, self.seed,
                                        ratios=config.nonlinear_ratios)
            else:
                self.objects[oid] = cls(self.sample_rate, self.seed)
        self.breath = BreathChain(self.sample_rate)
        self.mixer = Mixer(list(self.objects), self.sample_rate)
        self.scenes = config.scenes
        self.fault_count = 0
        self.block_index = 0
        self.control_seq = 0
        self._feature_queue: deque[FeatureVector] = deque()
        self._control_queue: deque = deque()
        self._fstate = FeatureState()
        self._dest_values: dict[str, float] = {}
        self._transition: _Transition | None = None
        self._fx_return: np.ndarray | None = None
        self._breath_src: np.ndarray | None = None
        self._breath_pos = 0
        self._applied: list[tuple[str, object]] = []
        self._have_features = False
        self.levels: dict[str, str] = {d.value: Level.MICRO.value
                                       for d in DeviceId}
        self.meters: dict = {}
        self.master_meter = (0.0, 0.0)
        self.scene_timeline: list[tuple[float, str]] = []
        self.current_scene: Scene = self.scenes[config.scene]
        self._activate_scene(self.current_scene)

    # -- setup ------------------------------------------------------------

    def _activate_scene(self, scene: Scene):
        """Hard-apply a scene (startup): no ramps, no transition."""
        self.mixer_state = _settle_state(scene)
        self.mixer.sync_targets(self.mixer_state)
        self.mixer.snap()
        self._matrix = scene.matrix
        self.current_scene = scene
        self.scene_timeline.append((self.now_us() / 1e6, scene.name))

    def set_breath_input(self, samples: np.ndarray | None):
        """Mono breath input looped onto the breath bus."""
        self._breath_src = samples if samples is not None and samples.size else None
        self._breath_pos = 0

    # -- time -------------------------------------------------------------

    def now_us(self) -> float:
        return self.block_index * self.block_size * 1e6 / self.sample_rate

    # -- inputs -----------------------------------------------------------

    def submit_feature(self, fv: FeatureVector):
        self._feature_queue.append(fv)

    def submit_control(self, ev: ControlEvent, on_error=None, on_done=None):
        self._control_queue.append((ev, on_error, on_done))

    def take_applied(self) -> list[tuple[str, object]]:
        out = self._applied
        self._applied = []
        return out

    # -- control application ----------------------------------------------

    def apply_control(self, ev: ControlEvent):
        """Apply one control event; raises ControlError when rejected."""
        parsed = parse_address(ev.address)
        if parsed is None:
            raise ControlError(f"unknown control address: {ev.address}")
        kind = parsed[0]
        if kind == "scene":
            if not isinstance(ev.value, str):
                raise ControlError("/scene takes a scene name string")
            self.switch_scene(ev.value)
            self._applied.append((ev.address, ev.value))
        elif kind in ("strip", "master"):
            if isinstance(ev.value, str):
                raise ControlError(f"{ev.address} takes a number")
            self.mixer_state = apply_control(self.mixer_state, ev)
            self.mixer.sync_targets(self.mixer_state)
            self._applied.append((ev.address, self._mixer_value(parsed)))
        elif kind == "breath_fx":
            if isinstance(ev.value, str):
                raise ControlError(f"{ev.address} takes a number")
            fld = parsed[1]
            self.breath.set_target(fld, float(ev.value))
            self._applied.append((ev.address, self.breath.params[fld].target))
        elif kind == "edge_weight":
            if isinstance(ev.value, str):
                raise ControlError(f"{ev.address} takes a number")
            idx = parsed[1]
            try:
                self._matrix = self._matrix.with_weight(idx, float(ev.value))
            except ValueError as e:
                raise ControlError(str(e)) from e
            self._applied.append((ev.address,
                                  self._matrix.edges[idx].weight))
        else:
            raise ControlError(f"unhandled control address: {ev.address}")
        self.control_seq += 1

    def _mixer_value(self, parsed):
        if parsed[0] == "master":
            return self.mixer_state.master_gain_db
        _, obj, fld = parsed
        value = getattr(self.mixer_state.strips[obj], fld)
        return bool(value) if fld == "mute" else float(value)

    def switch_scene(self, name: str):
        scene = self.scenes.get(name)
        if scene is None:
            raise ControlError(f"unknown scene: {name!r}")
        now = self.now_us()
        dur_us = scene.crossfade_s * 1e6
        if dur_us <= 0:
            self._transition = None
            self._activate_scene(scene)
            return
        self.scene_timeline.append((now / 1e6, name))
        self._transition = _Transition(
            scene=scene, old_values=dict(self._dest_values),
            t0_us=now, dur_us=dur_us)
        ramp = max(1, int(round(scene.crossfade_s * self.sample_rate)))
        fade = _fade_state(scene)
        for oid, strip in fade.strips.items():
            runner = self.mixer.strips[oid]
            runner.gain.set_target(10.0 ** (strip.gain_db / 20.0))
            runner.gain.slope = ((runner.gain.target - runner.gain.value)
                                 / ramp)
            runner.pan.set_target(strip.pan)
            runner.pan.slope = (runner.pan.target - runner.pan.value) / ramp
            runner.send.set_target(strip.send_breath)
            runner.send.slope = ((runner.send.target - runner.send.value)
                                 / ramp)
            runner.mute = False
        self.mixer.master.set_target(10.0 ** (fade.master_gain_db / 20.0))
        self.mixer.master.slope = ((self.mixer.master.target
                                    - self.mixer.master.value) / ramp)
        self.mixer_state = fade
        self._matrix = scene.matrix
        self.current_scene = scene

    # -- feature application ------------------------------------------------

    def _drain_features(self, until_us: float | None = None):
        fresh = False
        while self._feature_queue:
            if (until_us is not None
                    and self._feature_queue[0].timestamp_us > until_us):
                break
            fv = self._feature_queue.popleft()
            if fv.warm_up:
                continue
            self._fstate.update(fv)
            self.levels[fv.device_id.value] = fv.level.value
            fresh = True
        if fresh:
            self._have_features = True
        return fresh

    def _evaluate_mapping(self):
        """Matrix -> parameter targets, blending across a scene fade."""
        sums: dict[str, float] = {}
        for edge in self._matrix.edges:
            v = edge.weight * apply_curve(self._fstate.get(edge.source),
                                          edge.curve, edge.out_range)
            sums[edge.destination] = sums.get(edge.destination, 0.0) + v
        values = {dest: clamp_to_schema(dest, v, self.schema)
                  for dest, v in sums.items()}
        tr = self._transition
        if tr is not None:
            alpha = min(1.0, (self.now_us() - tr.t0_us) / tr.dur_us)
            blended = {}
            for dest in set(tr.old_values) | set(values):
                old = tr.old_values.get(dest)
                new = values.get(dest)
                if old is None:
                    old = self._current_target(dest)
                if new is None:
                    new = old
                blended[dest] = (1.0 - alpha) * old + alpha * new
            values = blended
        for dest, v in values.items():
            self._set_destination(dest, v)
        self._dest_values.update(values)

    def _current_target(self, dest: str) -> float:
        obj, _, param = dest.partition("/")
        target = self.breath if obj == "breath_chain" else self.objects[obj]
        return target.params[param].target

    def _set_destination(self, dest: str, value: float):
        obj, _, param = dest.partition("/")
        if obj == "breath_chain":
            self.breath.set_target(param, value)
        else:
            self.objects[obj].set_target(param, value)

    # -- audio ------------------------------------------------------------

    def process_block(self) -> np.ndarray:
        n = self.block_size
        while self._control_queue:
            ev, on_error, on_done = self._control_queue.popleft()
            try:
                self.apply_control(ev)
            except ControlError as e:
                if on_error is not None:
                    on_error(str(e))
            finally:
                if on_done is not None:
                    on_done()
        fresh = self._drain_features(until_us=self.now_us())
        tr = self._transition
        if fresh or (tr is not None and self._have_features):
            self._evaluate_mapping()
        if tr is not None and self.now_us() - tr.t0_us >= tr.dur_us:
            self.mixer_state = _settle_state(tr.scene)
            self.mixer.sync_targets(self.mixer_state)
            self._transition = None
        blocks = {oid: obj.process(n) for oid, obj in self.objects.items()}
        out, send_bus, meters = self.mixer.mix(blocks,
                                               fx_return=self._fx_return)
        if self._breath_src is not None:
            take = np.empty(n)
            pos = self._breath_pos
            src = self._breath_src
            filled = 0
            while filled < n:
                chunk = min(n - filled, src.size - pos)
                take[filled:filled + chunk] = src[pos:pos + chunk]
                filled += chunk
                pos = (pos + chunk) % src.size
            self._breath_pos = pos
            breath_in = send_bus + take
        else:
            breath_in = send_bus
        self._fx_return = self.breath.process(breath_in)
        if not np.all(np.isfinite(out)):
            self.fault_count += 1
            out = np.zeros((n, 2))
            for obj in self.objects.values():
                obj.reset()
            self.breath.reset()
            self._fx_return = None
        self.meters = meters
        peak = float(np.max(np.abs(out))) if n else 0.0
        rms = float(np.sqrt(np.mean(out * out))) if n else 0.0
        self.master_meter = (peak, rms)
        self.block_index += 1
        return out

    # -- state snapshot -----------------------------------------------------

    def snapshot(self) -> dict:
        """Full control-plane state for clients."""
        strips = {
            oid: {"gain_db": s.gain_db, "pan": s.pan,
                  "send_breath": s.send_breath, "mute": s.mute}
            for oid, s in sorted(self.mixer_state.strips.items())}
        edges = [
            {"index": i, "source": e.source, "destination": e.destination,
             "weight": e.weight, "curve": e.curve.kind, "k": e.curve.k,
             "out_range": list(e.out_range)}
            for i, e in enumerate(self._matrix.edges)]
        return {
            "scene": self.current_scene.name,
            "scenes": sorted(self.scenes),
            "mixer": {"strips": strips,
                      "master_gain_db": self.mixer_state.master_gain_db},
            "breath_fx": {f: self.breath.params[f].target
                          for f in BREATH_FX_FIELDS},
            "mapping": {"edges": edges},
            "levels": dict(self.levels),
            "calibration": {
                "devices": sorted(d.value for d in self.profile.devices)},
            "seq": self.control_seq,
        }


def render_offline(config: EngineConfig, replay_path: str | Path | None,
                   out_path: str | Path,
                   breath_path: str | Path | None = None,
                   profile: CalibrationProfile | None = None,
                   duration_s: float | None = None,
                   tail_s: float = 1.0) -> RenderReport:
    """Deterministic offline render -> 32-bit float stereo WAV + report."""
    if config.seed is None:
        raise ValueError("offline render requires a seed")
    warnings = []
    frames = replay_frames(replay_path) if replay_path is not None else []
    if not frames:
        warnings.append("empty replay: rendering silence")
        features = []
        t_offset = 0
    else:
        features = analyze_frames(frames, profile or default_profile())
        t_offset = frames[0].timestamp_us
    engine = Engine(config, profile)
    if breath_path is not None:
        engine.set_breath_input(
            load_breath_wav(breath_path, config.sample_rate))
    if duration_s is None:
        last_us = (features[-1].timestamp_us - t_offset) if features else 0
        duration_s = max(1.0, last_us / 1e6 + tail_s)
    n_blocks = max(1, int(math.ceil(
        duration_s * config.sample_rate / config.block_size)))
    queue = deque(FeatureVector(
        device_id=fv.device_id, timestamp_us=fv.timestamp_us - t_offset,
        mav_per_channel=fv.mav_per_channel, mav_aggregate=fv.mav_aggregate,
        level=fv.level, warm_up=fv.warm_up, overshoot=fv.overshoot)
        for fv in features)
    chunks = []
    t_start = time.perf_counter()
    for _ in range(n_blocks):
        now = engine.now_us()
        while queue and queue[0].timestamp_us <= now:
            engine.submit_feature(queue.popleft())
        chunks.append(engine.process_block())
    elapsed = time.perf_counter() - t_start
    audio = np.concatenate(chunks, axis=0)
    peak = float(np.max(np.abs(audio))) if audio.size else 0.0
    out_path = Path(out_path)
    wavfile.write(out_path, config.sample_rate, audio.astype(np.float32))
    rendered_s = audio.shape[0] / config.sample_rate
    report = RenderReport(
        out_path=str(out_path),
        sample_rate=config.sample_rate,
        block_size=config.block_size,
        seed=config.seed,
        duration_s=rendered_s,
        blocks=n_blocks,
        fault_count=engine.fault_count,
        peak=peak,
        rtf=elapsed / rendered_s if rendered_s else math.inf,
        scene_timeline=engine.scene_timeline,
        warnings=warnings,
    )
    report_path = out_path.with_name(out_path.stem + ".report.txt")
    report_path.write_text(report.format_text(), encoding="utf-8")
    return report


class NullSink:
    """Wall-clock paced sink for machines without an audio device."""

    def __init__(self, sample_rate: int, block_size: int):
        self.period = block_size / sample_rate
        self._next = None
        self.overruns = 0

    def write(self, block: np.ndarray):
        now = time.monotonic()
        if self._next is None:
            self._next = now
        self._next += self.period
        delay = self._next - now
        if delay > 0:
            time.sleep(delay)
        elif delay < -4 * self.period:
            self.overruns += 1
            self._next = now  # resync after a stall

    def close(self):
        pass


def make_sink(config: EngineConfig, kind: str = "auto"):
    """'auto' prefers a real device, falling back to the paced null sink."""
    if kind in ("auto", "device"):
        try:
            import sounddevice

            class DeviceSink:
                def __init__(self):
                    self.stream = sounddevice.OutputStream(
                        samplerate=config.sample_rate, channels=2,
                        blocksize=config.block_size, dtype="float32")
                    self.stream.start()
                    self.overruns = 0

                def write(self, block):
                    self.stream.write(np.asarray(block, dtype=np.float32))

                def close(self):
                    self.stream.stop()
                    self.stream.close()

            return DeviceSink()
        except Exception as e:
            if kind == "device":
                raise RuntimeError(f"audio device unavailable: {e}") from e
    return NullSink(config.sample_rate, config.block_size)


class LiveEngine:
    """Paced engine loop with OSC ingestion and a control/metering fan-out."""

    METER_HZ = 20.0
    HEARTBEAT_HZ = 10.0

    def __init__(self, config: EngineConfig,
                 profile: CalibrationProfile | None = None,
                 sink=None, receiver: OscReceiver | None = None):
        self.config = config
        self.profile = profile or default_profile()
        self.engine = Engine(config, self.profile)
        self.sink = sink
        self.receiver = receiver
        self._own_receiver = receiver is None
        self.extractors = {
            d: FeatureExtractor(d, self.profile.for_device(d))
            for d in DeviceId}
        self.feature_log: list[FeatureVector] | None = None
        self.recorder: RecordWriter | None = None
        self._observers: list = []
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self.started = threading.Event()

    def subscribe(self, fn):
        """fn(message dict) called from the engine thread after each block."""
        self._observers.append(fn)

    def _notify(self, message: dict):
        for fn in list(self._observers):
            fn(message)

    def submit_control(self, ev: ControlEvent, on_error=None, on_done=None):
        self.engine.submit_control(ev, on_error, on_done)

    def snapshot(self) -> dict:
        return self.engine.snapshot()

    def start(self):
        if self.sink is None:
            self.sink = make_sink(self.config, "auto")
        if self.receiver is None:
            self.receiver = OscReceiver(
                self.config.osc_port, self.config.osc_host,
                timestamp_mode=self.config.osc_timestamp_mode).start()
        if self.config.breath_wav:
            self.engine.set_breath_input(load_breath_wav(
                self.config.breath_wav, self.config.sample_rate))
        self._thread = threading.Thread(target=self._loop, name="engine",
                                        daemon=True)
        self._thread.start()
        self.started.set()
        return self

    def _loop(self):
        meter_every = max(1, int(round(
            self.config.sample_rate
            / (self.config.block_size * self.METER_HZ))))
        beat_every = max(1, int(round(
            self.config.sample_rate
            / (self.config.block_size * self.HEARTBEAT_HZ))))
        engine = self.engine
        while not self._stop.is_set():
            while self.receiver.frames:
                frame = self.receiver.frames.popleft()
                if self.recorder is not None:
                    self.recorder.write(frame)
                fv = self.extractors[frame.device_id].push(frame)
                if fv is not None and not fv.warm_up:
                    engine.submit_feature(fv)
                    if self.feature_log is not None:
                        self.feature_log.append(fv)
            while self.receiver.events:
                ev = self.receiver.events.popleft()
                engine.submit_control(ControlEvent(
                    source=Source.OSC, address=ev.address, value=ev.value,
                    timestamp_us=ev.timestamp_us))
            out = engine.process_block()
            applied = engine.take_applied()
            if applied:
                self._notify({"type": "diff",
                              "changes": {a: v for a, v in applied},
                              "seq": engine.control_seq})
            if engine.block_index % meter_every == 0:
                self._notify({
                    "type": "meters",
                    "strips": {oid: {"peak": m.peak, "rms": m.rms}
                               for oid, m in engine.meters.items()},
                    "master": {"peak": engine.master_meter[0],
                               "rms": engine.master_meter[1]},
                    "levels": dict(engine.levels),
                    "t_us": int(engine.now_us()),
                })
            if engine.block_index % beat_every == 0:
                self._notify({"type": "snapshot", "state": engine.snapshot()})
            self.sink.write(out)

    def handle_midi(self, message):
        ev = translate_midi(message, list(self.config.cc_map))
        if ev is not None:
            self.engine.submit_control(ev)

    def stop(self):
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
        if self._own_receiver and self.receiver is not None:
            self.receiver.stop()
        if self.recorder is not None:
            self.recorder.close()
        if self.sink is not None:
            self.sink.close()
