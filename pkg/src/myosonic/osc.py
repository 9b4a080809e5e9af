"""Minimal OSC 1.0 codec and packet classifier for the EMG/control stream.

Only the subset the engine speaks: int32/float32/string arguments, no
bundles, no timetags. Parsing never raises on arbitrary bytes; malformed
or unknown packets are counted and dropped.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .control import ControlEvent, Source
from .ingest import DeviceId, EmgFrame

INT8_MIN = -128
INT8_MAX = 127

EMG_ADDRESSES = {
    "/myo/left_arm/emg": DeviceId.LEFT_ARM,
    "/myo/right_calf/emg": DeviceId.RIGHT_CALF,
}
CTL_PREFIX = "/ctl/"


class OscDecodeError(ValueError):
    pass


def _pad4(n: int) -> int:
    return (n + 3) & ~3


def _encode_string(s: str) -> bytes:
    raw = s.encode("utf-8") + b"\x00"
    return raw + b"\x00" * (_pad4(len(raw)) - len(raw))


def encode_message(address: str, args: tuple = ()) -> bytes:
    """Encode an OSC message, inferring type tags from Python types."""
    tags = ","
    payload = b""
    for a in args:
        if isinstance(a, bool):
            raise TypeError("bool arguments not supported")
        if isinstance(a, int):
            tags += "i"
            payload += struct.pack(">i", a)
        elif isinstance(a, float):
            tags += "f"
            payload += struct.pack(">f", a)
        elif isinstance(a, str):
            tags += "s"
            payload += _encode_string(a)
        else:
            raise TypeError(f"unsupported OSC argument type {type(a).__name__}")
    return _encode_string(address) + _encode_string(tags) + payload


def _read_string(data: bytes, offset: int) -> tuple[str, int]:
    end = data.find(b"\x00", offset)
    if end < 0:
        raise OscDecodeError("unterminated string")
    try:
        s = data[offset:end].decode("utf-8")
    except UnicodeDecodeError as e:
        raise OscDecodeError("string not utf-8") from e
    return s, offset + _pad4(end - offset + 1)


def parse_message(data: bytes) -> tuple[str, str, list]:
    """Decode one OSC message into (address, typetags, args).

    Raises OscDecodeError for anything that is not a well-formed message.
    """
    if len(data) < 4 or data[0:1] != b"/":
        raise OscDecodeError("not an OSC message")
    address, offset = _read_string(data, 0)
    if offset >= len(data):
        # Messages with no type tag string are legal OSC 1.0; treat as zero args.
        return address, ",", []
    tags, offset = _read_string(data, offset)
    if not tags.startswith(","):
        raise OscDecodeError("missing type tag string")
    args = []
    for tag in tags[1:]:
        if tag == "i":
            if offset + 4 > len(data):
                raise OscDecodeError("truncated int32")
            args.append(struct.unpack_from(">i", data, offset)[0])
            offset += 4
        elif tag == "f":
            if offset + 4 > len(data):
                raise OscDecodeError("truncated float32")
            args.append(struct.unpack_from(">f", data, offset)[0])
            offset += 4
        elif tag == "s":
            s, offset = _read_string(data, offset)
            args.append(s)
        else:
            raise OscDecodeError(f"unsupported type tag {tag!r}")
    return address, tags, args


def encode_emg_frame(frame: EmgFrame) -> bytes:
    """Canonical wire form of an EMG frame (address + ,iiiiiiii + 8 int32)."""
    address = f"/myo/{frame.device_id.value}/emg"
    return encode_message(address, tuple(int(c) for c in frame.channels))


@dataclass
class ParseStats:
    frames: int = 0
    control_events: int = 0
    dropped: int = 0     # well-formed but unknown address / wrong shape
    malformed: int = 0   # not decodable as OSC


class OscPacketParser:
    """Classify raw datagrams into EmgFrames and ControlEvents.

    Never raises: anything unparseable bumps a counter and returns None.
    """

    def __init__(self):
        self.stats = ParseStats()

    def parse(self, packet: bytes, recv_timestamp_us: int):
        try:
            address, tags, args = parse_message(bytes(packet))
        except OscDecodeError:
            self.stats.malformed += 1
            return None

        device = EMG_ADDRESSES.get(address)
        if device is not None:
            if tags != ",iiiiiiii":
                self.stats.dropped += 1
                return None
            channels = tuple(
                min(INT8_MAX, max(INT8_MIN, int(v))) for v in args
            )
            self.stats.frames += 1
            return EmgFrame(device_id=device, timestamp_us=recv_timestamp_us,
                            channels=channels)

        if address.startswith(CTL_PREFIX):
            if len(args) == 1 and isinstance(args[0], (int, float)):
                self.stats.control_events += 1
                return ControlEvent(
                    source=Source.OSC,
                    address="/" + address[len(CTL_PREFIX):],
                    value=float(args[0]),
                    timestamp_us=recv_timestamp_us,
                )
            self.stats.dropped += 1
            return None

        self.stats.dropped += 1
        return None
