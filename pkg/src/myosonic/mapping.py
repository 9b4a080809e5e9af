"""Feature-to-parameter routing: weighted many-to-many edges with
per-edge scaling curves, plus the scene presets."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .features import FeatureVector, Level
from .ingest import DeviceId, N_CHANNELS
from .mixer import MixerState, StripState


class MappingError(ValueError):
    """Raised for invalid matrix or scene definitions at load time."""


_SOURCE_RE = re.compile(
    r"^(left_arm|right_calf)/(ch[1-8]|aggregate|level/(micro|meso|macro))$")


def validate_source(address: str):
    if not _SOURCE_RE.match(address):
        raise MappingError(
            f"unknown feature source: {address!r} "
            "(want <device>/ch<1-8>, <device>/aggregate, "
            "or <device>/level/<micro|meso|macro>)")


@dataclass(frozen=True)
class Curve:
    kind: str = "linear"  # "linear" | "exponential"
    k: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "exponential"):
            raise MappingError(f"unknown curve kind: {self.kind!r}")
        if self.kind == "exponential" and not self.k > 0:
            raise MappingError(f"curve exponent must be > 0, got {self.k}")


def apply_curve(x: float, curve: Curve,
                out_range: tuple[float, float]) -> float:
    """Clamp x to [0,1], shape it, and scale into out_range."""
    x = min(1.0, max(0.0, float(x)))
    if curve.kind == "exponential":
        x = x ** curve.k
    lo, hi = out_range
    return lo + x * (hi - lo)


@dataclass(frozen=True)
class MappingEdge:
    source: str
    destination: str  # "<object>/<param>"
    weight: float = 1.0
    curve: Curve = Curve()
    out_range: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        validate_source(self.source)
        if not -1.0 <= self.weight <= 1.0:
            raise MappingError(
                f"edge weight {self.weight} outside [-1, 1] "
                f"({self.source} -> {self.destination})")


@dataclass(frozen=True)
class MappingMatrix:
    edges: tuple[MappingEdge, ...] = ()

    def validate(self, schema: dict[str, dict[str, tuple]]):
        """Check every destination against the parameter schema."""
        for i, edge in enumerate(self.edges):
            obj, _, param = edge.destination.partition("/")
            if obj not in schema or param not in schema[obj]:
                raise MappingError(
                    f"edge {i}: unknown destination {edge.destination!r}")

    def with_weight(self, index: int, weight: float) -> "MappingMatrix":
        if not 0 <= index < len(self.edges):
            raise MappingError(f"no mapping edge at index {index}")
        edges = list(self.edges)
        edges[index] = MappingEdge(
            source=edges[index].source,
            destination=edges[index].destination,
            weight=min(1.0, max(-1.0, weight)),
            curve=edges[index].curve,
            out_range=edges[index].out_range)
        return MappingMatrix(tuple(edges))


class FeatureState:
    """Latest per-source feature values for both devices."""

    def __init__(self):
        self.values: dict[str, float] = {}

    def update(self, fv: FeatureVector):
        dev = fv.device_id.value
        for ch in range(N_CHANNELS):
            self.values[f"{dev}/ch{ch + 1}"] = fv.mav_per_channel[ch]
        self.values[f"{dev}/aggregate"] = fv.mav_aggregate
        for level in Level:
            self.values[f"{dev}/level/{level.value}"] = (
                1.0 if fv.level is level else 0.0)

    def get(self, source: str) -> float:
        return self.values.get(source, 0.0)


def map_features(fv: FeatureVector, matrix: MappingMatrix,
                 state: FeatureState | None = None,
                 ) -> list[tuple[str, float]]:
    """Evaluate the matrix -> ordered (destination, value) pairs.

    Stateless when called with just (fv, matrix): sources from the other
    device read as 0. With a shared FeatureState, fv refreshes that
    device and all destinations re-evaluate from the merged view.
    """
    if state is None:
        state = FeatureState()
    state.update(fv)
    sums: dict[str, float] = {}
    for edge in matrix.edges:
        v = edge.weight * apply_curve(
            state.get(edge.source), edge.curve, edge.out_range)
        sums[edge.destination] = sums.get(edge.destination, 0.0) + v
    return list(sums.items())


def clamp_to_schema(dest: str, value: float,
                    schema: dict[str, dict[str, tuple]]) -> float:
    obj, _, param = dest.partition("/")
    lo, hi, _default = schema[obj][param]
    return min(hi, max(lo, value))


@dataclass(frozen=True)
class Scene:
    name: str
    active_objects: frozenset[str]
    matrix: MappingMatrix
    mixer_snapshot: MixerState
    crossfade_s: float = 2.0

    def __post_init__(self):
        if not self.name:
            raise MappingError("scene name must be non-empty")
        if self.crossfade_s < 0:
            raise MappingError(
                f"scene {self.name!r}: crossfade_s must be >= 0")


def _edge(source, dest, weight=1.0, curve=Curve(), out_range=(0.0, 1.0)):
    return MappingEdge(source, dest, weight, curve, out_range)


def _exp(k):
    return Curve("exponential", k)


def _strips(**overrides) -> dict[str, StripState]:
    """All-muted strips, selectively overridden."""
    base = {oid: StripState(gain_db=-60.0, mute=True)
            for oid in ("friction", "fluidflow", "scraping", "bubble",
                        "nonlinear")}
    base.update(overrides)
    return base


def default_scenes() -> dict[str, Scene]:
    """The three shipped parts: breath, standstill, musicking."""
    left = DeviceId.LEFT_ARM.value
    calf = DeviceId.RIGHT_CALF.value

    breath = Scene(
        name="breath",
        active_objects=frozenset(),
        matrix=MappingMatrix((
            _edge(f"{calf}/aggregate", "breath_chain/mix",
                  out_range=(0.2, 0.9)),
            _edge(f"{left}/aggregate", "breath_chain/feedback",
                  curve=_exp(1.5), out_range=(0.0, 0.5)),
        )),
        mixer_snapshot=MixerState(strips=_strips(), master_gain_db=0.0),
    )

    standstill = Scene(
        name="standstill",
        active_objects=frozenset({"friction"}),
        matrix=MappingMatrix((
            _edge(f"{calf}/aggregate", "friction/force",
                  curve=_exp(1.5), out_range=(0.0, 0.9)),
            _edge(f"{calf}/aggregate", "friction/velocity",
                  out_range=(0.0, 0.5)),
            _edge(f"{left}/aggregate", "friction/bandpass_fc_hz",
                  curve=_exp(2.0), out_range=(200.0, 1800.0)),
            _edge(f"{left}/level/micro", "friction/pressure",
                  out_range=(0.0, 0.8)),
            _edge(f"{calf}/aggregate", "breath_chain/mix",
                  out_range=(0.1, 0.5)),
        )),
        mixer_snapshot=MixerState(strips=_strips(
            friction=StripState(gain_db=0.0, pan=0.0, send_breath=0.35),
        ), master_gain_db=0.0),
    )

    musicking = Scene(
        name="musicking",
        active_objects=frozenset({"friction", "fluidflow", "scraping",
                                  "bubble", "nonlinear"}),
        matrix=MappingMatrix((
            _edge(f"{left}/aggregate", "fluidflow/speed", curve=_exp(1.5)),
            _edge(f"{left}/ch2", "fluidflow/density",
                  out_range=(0.1, 1.0)),
            _edge(f"{left}/aggregate", "fluidflow/scrub_amount",
                  out_range=(0.0, 0.7)),
            _edge(f"{left}/ch5", "scraping/velocity", curve=_exp(2.0)),
            _edge(f"{left}/aggregate", "scraping/force",
                  out_range=(0.0, 0.8)),
            _edge(f"{left}/ch6", "scraping/grain"),
            _edge(f"{calf}/aggregate", "friction/force",
                  curve=_exp(2.0), out_range=(0.0, 0.8)),
            _edge(f"{calf}/aggregate", "friction/velocity",
                  out_range=(0.0, 0.5)),
            _edge(f"{calf}/level/meso", "friction/pressure",
                  out_range=(0.0, 0.7)),
            _edge(f"{left}/aggregate", "nonlinear/mod_index_1",
                  weight=0.5, curve=_exp(2.0), out_range=(0.0, 6.0)),
            _edge(f"{calf}/aggregate", "nonlinear/mod_index_2",
                  weight=0.5, curve=_exp(2.0), out_range=(0.0, 6.0)),
            _edge(f"{left}/aggregate", "nonlinear/drive",
                  weight=0.5, out_range=(1.0, 7.0)),
            _edge(f"{calf}/aggregate", "nonlinear/drive",
                  weight=0.5, out_range=(1.0, 7.0)),
            _edge(f"{calf}/level/macro", "nonlinear/rm_hz",
                  out_range=(0.0, 120.0)),
            _edge(f"{left}/level/macro", "bubble/amplitude",
                  out_range=(0.0, 0.9)),
            _edge(f"{left}/aggregate", "bubble/radius_m",
                  curve=_exp(2.0), out_range=(0.012, 0.002)),
            _edge(f"{calf}/aggregate", "breath_chain/mix",
                  out_range=(0.1, 0.6)),
        )),
        mixer_snapshot=MixerState(strips=_strips(
            friction=StripState(gain_db=-4.0, pan=-0.4, send_breath=0.25),
            fluidflow=StripState(gain_db=-6.0, pan=0.35, send_breath=0.2),
            scraping=StripState(gain_db=-8.0, pan=0.6),
            bubble=StripState(gain_db=-6.0, pan=-0.2, send_breath=0.3),
            nonlinear=StripState(gain_db=-14.0, pan=0.0, send_breath=0.15),
        ), master_gain_db=0.0),
    )

    return {s.name: s for s in (breath, standstill, musicking)}
