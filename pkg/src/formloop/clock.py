"""Clocks and id factories.

The broker assigns every timestamp and UUID itself. In-process deterministic
mode swaps in a simulated strictly-monotonic millisecond clock plus a seeded
UUID factory, which is what makes two runs of the same study byte-identical.
"""

from __future__ import annotations

import hashlib
import uuid
from datetime import datetime, timedelta, timezone

import numpy as np

EPOCH = datetime(2024, 1, 1, tzinfo=timezone.utc)


def component_seed(root_seed: int, name: str) -> np.random.SeedSequence:
    """Derive a per-component seed stream from the study seed and a stable name.

    Independent of creation order, so adding a component never perturbs the
    streams of existing ones.
    """
    digest = hashlib.sha256(name.encode()).digest()
    salt = int.from_bytes(digest[:8], "big")
    return np.random.SeedSequence([int(root_seed), salt])


def stable_int(*parts) -> int:
    """Order-sensitive 63-bit hash of the given parts; stable across runs."""
    digest = hashlib.sha256("|".join(repr(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


class WallClock:
    """Real UTC time at millisecond precision."""

    def now(self) -> datetime:
        t = datetime.now(timezone.utc)
        return t.replace(microsecond=(t.microsecond // 1000) * 1000)


class SimClock:
    """Simulated clock: every call advances one millisecond.

    Strict monotonicity gives the protocol a total order on timestamps, which
    the orchestrator-sequencing invariant relies on.
    """

    def __init__(self, start: datetime = EPOCH):
        self._start = start
        self._ticks = 0

    def now(self) -> datetime:
        self._ticks += 1
        return self._start + timedelta(milliseconds=self._ticks)

    def peek(self) -> datetime:
        return self._start + timedelta(milliseconds=self._ticks)


class RandomIds:
    """UUID4s from os.urandom (service mode)."""

    def new(self) -> str:
        return str(uuid.uuid4())


class SeededIds:
    """Deterministic UUID4-shaped ids from a seeded generator."""

    def __init__(self, seed: np.random.SeedSequence | int):
        self._rng = np.random.default_rng(seed)

    def new(self) -> str:
        raw = bytearray(self._rng.bytes(16))
        raw[6] = (raw[6] & 0x0F) | 0x40  # version 4
        raw[8] = (raw[8] & 0x3F) | 0x80  # RFC 4122 variant
        return str(uuid.UUID(bytes=bytes(raw)))


def isoformat_ms(t: datetime) -> str:
    return t.isoformat(timespec="milliseconds")
