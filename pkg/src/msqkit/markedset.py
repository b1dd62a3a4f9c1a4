"""Bitstring-over-{1..B} marked sets: the black-box oracle input.

Externally the domain is 1..B; internally bit x-1 of an integer mask holds
membership of x, so the QFT side can index from 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .errors import FormatError, ParameterError, RangeError
from .squares import ProgressionFamily

__all__ = ["MarkedSet", "NoiseSpec", "from_progressions", "apply_noise"]

MAGIC_BYTES = b"MSQSET01"

NOISE_KINDS = ("bernoulli-density", "target-density", "small-bias")


def _rng(seed: int) -> np.random.Generator:
    # counter-based generator so that seeded runs are reproducible everywhere
    return np.random.Generator(np.random.Philox(key=seed))


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    density: float
    seed: int

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ParameterError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.density <= 1.0:
            raise ParameterError(f"density must be in [0,1], got {self.density}")
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError("seed must fit in 64 bits")


@dataclass(frozen=True)
class MarkedSet:
    """Immutable marked subset of {1..B}, B = 2^q."""

    q: int
    mask: int
    seed: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.q < 1:
            raise ParameterError(f"qubit count must be >= 1, got {self.q}")
        if self.mask < 0 or self.mask >> self.domain_size:
            raise RangeError("mask has bits outside [1, B]")

    @property
    def domain_size(self) -> int:
        return 1 << self.q

    @property
    def B(self) -> int:
        return self.domain_size

    @property
    def popcount(self) -> int:
        return self.mask.bit_count()

    @classmethod
    def from_indices(cls, q: int, indices: Iterable[int], seed: int | None = None) -> "MarkedSet":
        b = 1 << q
        mask = 0
        for x in indices:
            if not 1 <= x <= b:
                raise RangeError(f"index {x} outside [1, {b}]")
            mask |= 1 << (x - 1)
        return cls(q=q, mask=mask, seed=seed)

    def membership(self, x: int) -> int:
        if not 1 <= x <= self.domain_size:
            raise RangeError(f"index {x} outside [1, {self.domain_size}]")
        return (self.mask >> (x - 1)) & 1

    def iter_marked(self) -> Iterator[int]:
        mask = self.mask
        while mask:
            low = mask & -mask
            yield low.bit_length()
            mask ^= low

    def bit_array(self) -> np.ndarray:
        """Membership as a uint8 array indexed 0..B-1 (internal indexing)."""
        payload = self.mask.to_bytes((self.domain_size + 7) // 8, "little")
        bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), bitorder="little")
        return bits[: self.domain_size]

    def serialize(self) -> bytes:
        payload = self.mask.to_bytes((self.domain_size + 7) // 8, "little")
        return MAGIC_BYTES + bytes([self.q]) + payload

    @classmethod
    def deserialize(cls, data: bytes) -> "MarkedSet":
        if len(data) < len(MAGIC_BYTES) + 1:
            raise FormatError("payload too short for a marked-set file")
        if data[: len(MAGIC_BYTES)] != MAGIC_BYTES:
            raise FormatError("bad magic bytes")
        q = data[len(MAGIC_BYTES)]
        if q < 1:
            raise FormatError("invalid qubit count byte")
        b = 1 << q
        payload = data[len(MAGIC_BYTES) + 1 :]
        if len(payload) != (b + 7) // 8:
            raise FormatError(
                f"expected {(b + 7) // 8} payload bytes for q={q}, got {len(payload)}"
            )
        return cls(q=q, mask=int.from_bytes(payload, "little"))


def from_progressions(fam: ProgressionFamily, q: int) -> MarkedSet:
    """Mark exactly the n^2 progression elements inside {1..2^q}."""
    return MarkedSet.from_indices(q, fam.elements())


def apply_noise(s: MarkedSet, spec: NoiseSpec) -> MarkedSet:
    """Add marks according to the noise spec; never clears an existing mark.

    target-density fills uniformly chosen zeros until the global ones
    density reaches the parameter; bernoulli-density marks each zero
    independently.  small-bias currently uses the same seeded low-density
    Bernoulli marking and is the hook for an epsilon-biased generator.
    """
    b = s.domain_size
    bits = s.bit_array()
    zeros = np.flatnonzero(bits == 0)
    rng = _rng(spec.seed)
    if spec.kind == "target-density":
        target = round(spec.density * b)
        if target < s.popcount:
            raise ParameterError(
                f"target density {spec.density} is below the current "
                f"density {s.popcount / b}"
            )
        extra = target - s.popcount
        chosen = rng.choice(zeros.size, size=extra, replace=False)
        bits[zeros[chosen]] = 1
    else:  # bernoulli-density, small-bias
        flips = rng.random(zeros.size) < spec.density
        bits[zeros[flips]] = 1
    mask = int.from_bytes(
        np.packbits(bits, bitorder="little").tobytes(), "little"
    )
    return MarkedSet(q=s.q, mask=mask, seed=spec.seed)
