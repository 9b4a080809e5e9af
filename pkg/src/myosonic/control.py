"""Unified control events: one address namespace over MIDI, OSC and WebSocket.

Addresses:
    /mix/strip/<object>/gain_db|pan|send_breath|mute
    /mix/master/gain_db
    /fx/breath/rt60_s|feedback|mix
    /map/edge/<index>/weight
    /scene                      (string value, scene name)
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass


class Source(str, enum.Enum):
    MIDI = "midi"
    OSC = "osc"
    WS = "ws"


@dataclass(frozen=True)
class ControlEvent:
    source: Source
    address: str
    value: float | str
    timestamp_us: int

    def __post_init__(self):
        if not self.address:
            raise ValueError("control event address must be non-empty")
        if isinstance(self.value, float) and not math.isfinite(self.value):
            raise ValueError("control event value must be finite")


class ControlError(Exception):
    """Rejected control event (unknown address or target)."""


@dataclass(frozen=True)
class CcMapEntry:
    channel: int     # 1-based MIDI channel
    cc: int
    address: str
    min: float
    max: float


CC_STATUS = 0xB0


def translate_midi(message, cc_map: list[CcMapEntry]):
    """Map a 3-byte MIDI CC message to a ControlEvent, or None if unmapped.

    `message` is (status, data1, data2) bytes or ints; value scales linearly
    from [0, 127] into the entry's [min, max].
    """
    if len(message) != 3:
        return None
    status, data1, data2 = (int(b) for b in message)
    if status & 0xF0 != CC_STATUS:
        return None
    channel = (status & 0x0F) + 1
    for entry in cc_map:
        if entry.channel == channel and entry.cc == data1:
            value = entry.min + (data2 / 127.0) * (entry.max - entry.min)
            return ControlEvent(source=Source.MIDI, address=entry.address,
                                value=value, timestamp_us=0)
    return None


STRIP_FIELDS = ("gain_db", "pan", "send_breath", "mute")
BREATH_FX_FIELDS = ("rt60_s", "feedback", "mix")

_STRIP_RE = re.compile(r"^/mix/strip/(?P<obj>[a-z0-9_]+)/(?P<field>[a-z_]+)$")
_EDGE_RE = re.compile(r"^/map/edge/(?P<idx>\d+)/weight$")
_BREATH_RE = re.compile(r"^/fx/breath/(?P<field>[a-z0-9_]+)$")


def parse_address(address: str):
    """Split a control address into a (kind, *parts) tuple.

    Kinds: ("strip", obj, field), ("master",), ("breath_fx", field),
    ("edge_weight", index), ("scene",). Raises ControlError when the
    address does not belong to the namespace.
    """
    m = _STRIP_RE.match(address)
    if m:
        if m.group("field") not in STRIP_FIELDS:
            raise ControlError(f"unknown strip field in {address!r}")
        return ("strip", m.group("obj"), m.group("field"))
    if address == "/mix/master/gain_db":
        return ("master",)
    m = _BREATH_RE.match(address)
    if m:
        if m.group("field") not in BREATH_FX_FIELDS:
            raise ControlError(f"unknown breath fx field in {address!r}")
        return ("breath_fx", m.group("field"))
    m = _EDGE_RE.match(address)
    if m:
        return ("edge_weight", int(m.group("idx")))
    if address == "/scene":
        return ("scene",)
    raise ControlError(f"unknown control address {address!r}")
