"""Shared machinery for sound objects: ramped parameters, seeded RNG,
overlap-add event scheduling, and the NaN containment guard."""

from __future__ import annotations

import zlib

import numpy as np


class Param:
    """Control parameter with per-block linear ramping.

    A new target takes effect across the next processed block; the
    per-sample delta never exceeds (target - current) / block_length.
    """

    def __init__(self, lo: float, hi: float, default: float):
        self.lo = lo
        self.hi = hi
        self.current = float(default)
        self.target = float(default)

    def set_target(self, value: float):
        self.target = float(min(self.hi, max(self.lo, value)))

    def snap(self, value: float):
        self.set_target(value)
        self.current = self.target

    def block(self, n: int) -> np.ndarray:
        """Per-sample values ramping current -> target; advances state."""
        if self.current == self.target:
            return np.full(n, self.current)
        ramp = self.current + (self.target - self.current) * (
            np.arange(1, n + 1) / n)
        self.current = self.target
        return ramp


def object_rng(seed: int, object_id: str) -> np.random.Generator:
    """Independent deterministic stream per object id.

    crc32 keys the id so adding or removing other objects never reshuffles
    this object's draws.
    """
    key = zlib.crc32(object_id.encode())
    return np.random.default_rng(np.random.SeedSequence((seed, key)))


class SoundObject:
    """A mono synthesis voice advanced block by block by the audio context."""

    OBJECT_ID = ""
    PARAMS: dict[str, tuple[float, float, float]] = {}  # name -> (lo, hi, default)

    def __init__(self, sample_rate: int, seed: int = 0):
        self.sample_rate = int(sample_rate)
        self.params = {name: Param(lo, hi, default)
                       for name, (lo, hi, default) in self.PARAMS.items()}
        self.rng = object_rng(seed, self.OBJECT_ID)
        self.faults = 0

    def set_target(self, name: str, value: float):
        self.params[name].set_target(value)

    def snap_params(self):
        for p in self.params.values():
            p.current = p.target

    def param_block(self, name: str, n: int) -> np.ndarray:
        return self.params[name].block(n)

    def process(self, n: int) -> np.ndarray:
        out = self._render(n)
        if not np.all(np.isfinite(out)):
            self.faults += 1
            self.reset()
            return np.zeros(n)
        return out

    def _render(self, n: int) -> np.ndarray:
        raise NotImplementedError

    def reset(self):
        """Clear audio state (not parameters, not the RNG stream)."""


class OverlapAdder:
    """Accumulates event waveforms that may extend past the current block.

    Ring-buffered so adds and pops stay O(event length) regardless of how
    far events overhang; the buffer grows (power of two) if an event
    outruns the current capacity.
    """

    def __init__(self, capacity: int = 1 << 17):
        self.buf = np.zeros(capacity)
        self.head = 0

    def _grow(self, need: int):
        cap = self.buf.size
        while cap < need:
            cap *= 2
        linear = np.concatenate([self.buf[self.head:], self.buf[:self.head]])
        self.buf = np.zeros(cap)
        self.buf[:linear.size] = linear
        self.head = 0

    def add(self, event: np.ndarray, offset: int):
        need = offset + event.size
        if need > self.buf.size:
            self._grow(need)
        cap = self.buf.size
        start = (self.head + offset) % cap
        first = min(event.size, cap - start)
        self.buf[start:start + first] += event[:first]
        if first < event.size:
            self.buf[:event.size - first] += event[first:]

    def pop(self, n: int) -> np.ndarray:
        if n > self.buf.size:
            self._grow(n)
        cap = self.buf.size
        out = np.empty(n)
        first = min(n, cap - self.head)
        out[:first] = self.buf[self.head:self.head + first]
        self.buf[self.head:self.head + first] = 0.0
        if first < n:
            out[first:] = self.buf[:n - first]
            self.buf[:n - first] = 0.0
        self.head = (self.head + n) % cap
        return out

    def clear(self):
        self.buf[:] = 0.0
        self.head = 0


def soft_limit(x: np.ndarray) -> np.ndarray:
    """Transparent below ~0.5, hard-bounded by 2; keeps dense event
    streams inside the engine's headroom without a feedback path."""
    return 2.0 * np.tanh(0.5 * x)
