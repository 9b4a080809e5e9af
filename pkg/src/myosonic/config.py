"""TOML configuration: engine settings, MIDI CC map, and scene presets.

The config file is the source of truth; CLI flags override individual
fields. Validation errors carry the TOML path of the offending field.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .control import CcMapEntry
from .mapping import (Curve, MappingEdge, MappingError, MappingMatrix,
                      Scene, default_scenes)
from .mixer import GAIN_DB_MAX, GAIN_DB_MIN, MixerState, StripState
from .synth import OBJECT_CLASSES, parameter_schema

DEFAULT_SAMPLE_RATE = 48000
DEFAULT_BLOCK_SIZE = 256
DEFAULT_OSC_PORT = 9129
DEFAULT_WS_PORT = 9130


class ConfigError(ValueError):
    """Invalid configuration; message carries the TOML path."""


@dataclass(frozen=True)
class EngineConfig:
    sample_rate: int = DEFAULT_SAMPLE_RATE
    block_size: int = DEFAULT_BLOCK_SIZE
    seed: int | None = None
    scene: str = "breath"
    osc_host: str = "127.0.0.1"
    osc_port: int = DEFAULT_OSC_PORT
    osc_timestamp_mode: str = "receipt"
    ws_host: str = "127.0.0.1"
    ws_port: int = DEFAULT_WS_PORT
    calibration_path: str | None = None
    breath_wav: str | None = None
    nonlinear_ratios: tuple[float, float, float] = (1.01, 2.02, 3.98)
    cc_map: tuple[CcMapEntry, ...] = ()
    scenes: dict[str, Scene] = field(default_factory=default_scenes)

    def __post_init__(self):
        bs = self.block_size
        if bs < 64 or bs > 1024 or bs & (bs - 1):
            raise ConfigError(
                f"block_size: must be a power of two in [64, 1024], got {bs}")
        if self.sample_rate < 8000:
            raise ConfigError(
                f"sample_rate: must be >= 8000, got {self.sample_rate}")
        if self.osc_timestamp_mode not in ("receipt", "sequence"):
            raise ConfigError(
                "osc.timestamp_mode: must be 'receipt' or 'sequence', "
                f"got {self.osc_timestamp_mode!r}")
        if self.scene not in self.scenes:
            raise ConfigError(
                f"scene: unknown initial scene {self.scene!r}; "
                f"available: {sorted(self.scenes)}")


def _expect(table: dict, key: str, types, path: str, default=None,
            required=False):
    if key not in table:
        if required:
            raise ConfigError(f"{path}.{key}: required field missing")
        return default
    value = table[key]
    if not isinstance(value, types) or (
            isinstance(value, bool) and bool not in (
                types if isinstance(types, tuple) else (types,))):
        raise ConfigError(
            f"{path}.{key}: expected {types}, got {type(value).__name__}")
    return value


def _parse_cc_map(tables: list, path: str) -> tuple[CcMapEntry, ...]:
    entries = []
    for i, t in enumerate(tables):
        p = f"{path}[{i}]"
        if not isinstance(t, dict):
            raise ConfigError(f"{p}: expected a table")
        try:
            entries.append(CcMapEntry(
                channel=_expect(t, "channel", int, p, required=True),
                cc=_expect(t, "cc", int, p, required=True),
                address=_expect(t, "address", str, p, required=True),
                min=float(_expect(t, "min", (int, float), p, required=True)),
                max=float(_expect(t, "max", (int, float), p, required=True)),
            ))
        except ValueError as e:
            raise ConfigError(f"{p}: {e}") from e
    return tuple(entries)


def _parse_strip(t: dict, path: str) -> StripState:
    gain = float(_expect(t, "gain_db", (int, float), path, default=0.0))
    if not GAIN_DB_MIN <= gain <= GAIN_DB_MAX:
        raise ConfigError(
            f"{path}.gain_db: outside [{GAIN_DB_MIN}, {GAIN_DB_MAX}]")
    unknown = set(t) - {"gain_db", "pan", "send_breath", "mute"}
    if unknown:
        raise ConfigError(f"{path}: unknown fields {sorted(unknown)}")
    return StripState(
        gain_db=gain,
        pan=float(_expect(t, "pan", (int, float), path, default=0.0)),
        send_breath=float(
            _expect(t, "send_breath", (int, float), path, default=0.0)),
        mute=_expect(t, "mute", bool, path, default=False),
    ).clamped()


def _parse_edge(t: dict, path: str) -> MappingEdge:
    curve_kind = _expect(t, "curve", str, path, default="linear")
    k = float(_expect(t, "k", (int, float), path, default=1.0))
    rng = _expect(t, "out_range", list, path, default=[0.0, 1.0])
    if len(rng) != 2 or not all(isinstance(v, (int, float)) for v in rng):
        raise ConfigError(f"{path}.out_range: expected [min, max] reals")
    try:
        return MappingEdge(
            source=_expect(t, "source", str, path, required=True),
            destination=_expect(t, "destination", str, path, required=True),
            weight=float(
                _expect(t, "weight", (int, float), path, default=1.0)),
            curve=Curve(curve_kind, k),
            out_range=(float(rng[0]), float(rng[1])),
        )
    except MappingError as e:
        raise ConfigError(f"{path}: {e}") from e


def _parse_scene(t: dict, path: str, schema) -> Scene:
    name = _expect(t, "name", str, path, required=True)
    active = _expect(t, "active_objects", list, path, default=[])
    for i, obj in enumerate(active):
        if obj not in OBJECT_CLASSES:
            raise ConfigError(
                f"{path}.active_objects[{i}]: unknown object {obj!r}")
    edges = []
    for i, et in enumerate(t.get("edge", [])):
        if not isinstance(et, dict):
            raise ConfigError(f"{path}.edge[{i}]: expected a table")
        edges.append(_parse_edge(et, f"{path}.edge[{i}]"))
    matrix = MappingMatrix(tuple(edges))
    try:
        matrix.validate(schema)
    except MappingError as e:
        raise ConfigError(f"{path}: {e}") from e
    mixer_t = t.get("mixer", {})
    if not isinstance(mixer_t, dict):
        raise ConfigError(f"{path}.mixer: expected a table")
    strips = {oid: StripState(gain_db=GAIN_DB_MIN, mute=True)
              for oid in OBJECT_CLASSES}
    master_db = 0.0
    for key, st in mixer_t.items():
        p = f"{path}.mixer.{key}"
        if not isinstance(st, dict):
            raise ConfigError(f"{p}: expected a table")
        if key == "master":
            master_db = float(
                _expect(st, "gain_db", (int, float), p, default=0.0))
        elif key in OBJECT_CLASSES:
            strips[key] = _parse_strip(st, p)
        else:
            raise ConfigError(f"{p}: unknown mixer strip")
    try:
        return Scene(
            name=name,
            active_objects=frozenset(active),
            matrix=matrix,
            mixer_snapshot=MixerState(strips=strips,
                                      master_gain_db=master_db),
            crossfade_s=float(_expect(
                t, "crossfade_s", (int, float), path, default=2.0)),
        )
    except MappingError as e:
        raise ConfigError(f"{path}: {e}") from e


def parse_config(data: dict, base_dir: Path | None = None) -> EngineConfig:
    schema = parameter_schema()
    root = "config"
    osc = data.get("osc", {})
    control = data.get("control", {})
    midi = data.get("midi", {})
    calibration = data.get("calibration", {})
    breath = data.get("breath", {})
    synth_t = data.get("synth", {})
    for name, t in (("osc", osc), ("control", control), ("midi", midi),
                    ("calibration", calibration), ("breath", breath),
                    ("synth", synth_t)):
        if not isinstance(t, dict):
            raise ConfigError(f"{root}.{name}: expected a table")

    scenes = default_scenes()
    scene_tables = data.get("scene", [])
    if not isinstance(scene_tables, list):
        raise ConfigError(f"{root}.scene: expected an array of tables")
    for i, t in enumerate(scene_tables):
        scene = _parse_scene(t, f"scene[{i}]", schema)
        scenes[scene.name] = scene

    def resolve(p):
        if p is None:
            return None
        path = Path(p)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return str(path)

    ratios = synth_t.get("nonlinear", {}).get(
        "mod_ratios", [1.01, 2.02, 3.98])
    if (not isinstance(ratios, list) or len(ratios) != 3
            or not all(isinstance(r, (int, float)) and r > 0
                       for r in ratios)):
        raise ConfigError(
            "synth.nonlinear.mod_ratios: expected 3 positive reals")

    seed = _expect(data, "seed", int, root)
    try:
        return EngineConfig(
            sample_rate=_expect(data, "sample_rate", int, root,
                                default=DEFAULT_SAMPLE_RATE),
            block_size=_expect(data, "block_size", int, root,
                               default=DEFAULT_BLOCK_SIZE),
            seed=seed,
            # start_scene, because [[scene]] holds the scene definitions
            scene=_expect(data, "start_scene", str, root, default="breath"),
            osc_host=_expect(osc, "host", str, "osc", default="127.0.0.1"),
            osc_port=_expect(osc, "port", int, "osc",
                             default=DEFAULT_OSC_PORT),
            osc_timestamp_mode=_expect(osc, "timestamp_mode", str, "osc",
                                       default="receipt"),
            ws_host=_expect(control, "host", str, "control",
                            default="127.0.0.1"),
            ws_port=_expect(control, "port", int, "control",
                            default=DEFAULT_WS_PORT),
            calibration_path=resolve(
                _expect(calibration, "path", str, "calibration")),
            breath_wav=resolve(_expect(breath, "wav", str, "breath")),
            nonlinear_ratios=tuple(float(r) for r in ratios),
            cc_map=_parse_cc_map(midi.get("cc", []), "midi.cc"),
            scenes=scenes,
        )
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e)) from e


def load_config(path: str | Path | None) -> EngineConfig:
    """Load a TOML config; None -> all defaults."""
    if path is None:
        return EngineConfig()
    p = Path(path)
    try:
        with open(p, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {p}")
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{p}: invalid TOML: {e}")
    return parse_config(data, base_dir=p.parent)


def override(config: EngineConfig, **kwargs) -> EngineConfig:
    """Apply non-None CLI overrides onto a loaded config."""
    updates = {k: v for k, v in kwargs.items() if v is not None}
    return replace(config, **updates) if updates else config
