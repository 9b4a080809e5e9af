"""Sound object registry and the exported parameter schema."""

from __future__ import annotations

from .base import OverlapAdder, Param, SoundObject, object_rng, soft_limit
from .breathfx import BreathChain
from .bubble import Bubble, bubble_render
from .fluidflow import FluidFlow, onset_rate_hz
from .friction import Friction
from .nonlinear import Nonlinear
from .scraping import Scraping
from .scrub import ScrubDelay

OBJECT_CLASSES: dict[str, type[SoundObject]] = {
    cls.OBJECT_ID: cls
    for cls in (Friction, FluidFlow, Scraping, Bubble, Nonlinear)
}


def parameter_schema() -> dict[str, dict[str, tuple[float, float, float]]]:
    """object id -> parameter name -> (lo, hi, default).

    Machine-readable listing used to validate mapping destinations and to
    populate UI routing; includes the breath chain bus.
    """
    schema = {oid: dict(cls.PARAMS) for oid, cls in OBJECT_CLASSES.items()}
    schema[BreathChain.OBJECT_ID] = dict(BreathChain.PARAMS)
    return schema


__all__ = [
    "BreathChain", "Bubble", "FluidFlow", "Friction", "Nonlinear",
    "OBJECT_CLASSES", "OverlapAdder", "Param", "Scraping", "ScrubDelay",
    "SoundObject", "bubble_render", "object_rng", "onset_rate_hz",
    "parameter_schema", "soft_limit",
]
