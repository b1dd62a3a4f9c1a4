"""Classical factorization (the stand-in for the quantum factoring step),
sum-of-two-squares testing, finite bounds for mixed-power 3x3 systems, and
absence certification for magic squares of squares."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd, isqrt
from typing import NamedTuple

from .errors import DomainError, ResourceError, UnsupportedOrderError
from .markedset import MarkedSet
from .squares import validate_square

__all__ = [
    "Factorization",
    "BoundResult",
    "AbsenceCertificate",
    "factorize",
    "is_prime",
    "sum_of_two_squares",
    "gap_expression",
    "compute_bound",
    "exhaustive_mixed_power_search",
    "certify_absence_squares",
]

_TRIAL_LIMIT = 10**6
_small_primes: list[int] | None = None


def _sieve_primes() -> list[int]:
    global _small_primes
    if _small_primes is None:
        limit = _TRIAL_LIMIT
        flags = bytearray([1]) * (limit + 1)
        flags[0] = flags[1] = 0
        for p in range(2, isqrt(limit) + 1):
            if flags[p]:
                flags[p * p :: p] = bytearray(len(flags[p * p :: p]))
        _small_primes = [i for i, f in enumerate(flags) if f]
    return _small_primes


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin (exact for n < 3.3e24)."""
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _pollard_brent(n: int) -> int:
    """Deterministic Brent-cycle rho; returns a nontrivial factor of
    composite odd n."""
    if n % 2 == 0:
        return 2
    for c in range(1, 100):
        y, m, g, r, q = 2, 128, 1, 1, 1
        x = ys = y
        while g == 1:
            x = y
            for _ in range(r):
                y = (y * y + c) % n
            j = 0
            while j < r and g == 1:
                ys = y
                for _ in range(min(m, r - j)):
                    y = (y * y + c) % n
                    q = q * abs(x - y) % n
                g = gcd(q, n)
                j += m
            r *= 2
        if g == n:
            g = 1
            while g == 1:
                ys = (ys * ys + c) % n
                g = gcd(abs(x - ys), n)
        if g != n:
            return g
    raise DomainError(f"rho failed to split {n}")  # pragma: no cover


@dataclass(frozen=True)
class Factorization:
    z: int
    factors: tuple[tuple[int, int], ...]  # (prime, exponent), primes ascending

    def product(self) -> int:
        out = 1
        for p, e in self.factors:
            out *= p**e
        return out

    def to_json(self) -> dict:
        return {"z": self.z, "factors": [[p, e] for p, e in self.factors]}


def factorize(z: int) -> Factorization:
    """Complete prime factorization; trial division then rho splitting.

    This is the classical stand-in for the quantum factoring subroutine,
    which is out of scope here.
    """
    if z < 1:
        raise DomainError(f"factorize needs z >= 1, got {z}")
    counts: dict[int, int] = {}
    m = z
    for p in _sieve_primes():
        if p * p > m:
            break
        while m % p == 0:
            counts[p] = counts.get(p, 0) + 1
            m //= p
    stack = [m] if m > 1 else []
    while stack:
        v = stack.pop()
        if v == 1:
            continue
        if is_prime(v):
            counts[v] = counts.get(v, 0) + 1
            continue
        d = _pollard_brent(v)
        stack += [d, v // d]
    return Factorization(z=z, factors=tuple(sorted(counts.items())))


def sum_of_two_squares(z: int) -> bool:
    """True iff z = x^2 + y^2 for integers x, y: no prime p = 3 (mod 4)
    may appear to an odd power."""
    if z < 0:
        raise DomainError(f"need z >= 0, got {z}")
    if z <= 1:
        return True
    return all(
        e % 2 == 0 for p, e in factorize(z).factors if p % 4 == 3
    )


def gap_expression(t: int, z: int) -> Fraction:
    """Normalized gap (t^z - (t-1)^(z-1)) / t^z between the two largest
    mixed-power entries."""
    return Fraction(t**z - (t - 1) ** (z - 1), t**z)


class BoundResult(NamedTuple):
    t0: int
    U: int
    horizon: int


def compute_bound(z: int, horizon: int = 10**6) -> BoundResult:
    """Least t0 >= 2 from which the normalized gap stays >= 1/3 up to the
    horizon, and the entry bound U = (t0 + 1)^z."""
    if z < 2:
        raise DomainError(f"need z >= 2, got {z}")
    last_fail = 1
    for t in range(2, horizon + 1):
        # gap(t) >= 1/3  <=>  2 t^z >= 3 (t-1)^(z-1), exactly in integers
        if 2 * t**z < 3 * (t - 1) ** (z - 1):
            last_fail = t
    t0 = last_fail + 1
    return BoundResult(t0=t0, U=(t0 + 1) ** z, horizon=horizon)


def _powers_up_to(exp: int, cap: int) -> list[int]:
    if exp == 1:
        return list(range(1, cap + 1))
    out = []
    j = 1
    while j**exp <= cap:
        out.append(j**exp)
        j += 1
    return out


def exhaustive_mixed_power_search(z: int, cap: int, budget: int = 10**7) -> list[tuple[tuple[int, ...], ...]]:
    """All 3x3 magic squares with entries <= cap whose largest entry is a
    z-th power while every other entry is a (z-1)-th power.

    Plain exhaustive enumeration; each qualifying grid (including
    symmetries) is listed.  Exceeding the step budget raises ResourceError
    carrying the partial result.
    """
    if z < 2:
        raise DomainError(f"need z >= 2, got {z}")
    if cap < 1:
        return []
    others = set(_powers_up_to(z - 1, cap))
    bigs = set(_powers_up_to(z, cap))
    allowed = sorted(others | bigs)
    found: list[tuple[tuple[int, ...], ...]] = []
    steps = 0
    for a in allowed:
        for b in allowed:
            for c in allowed:
                m = a + b + c
                for d in allowed:
                    steps += 1
                    if steps > budget:
                        raise ResourceError(
                            f"enumeration budget {budget} exhausted", partial=found
                        )
                    g = m - a - d
                    e = m - c - g
                    f_ = m - d - e
                    h = m - b - e
                    i = m - c - f_
                    cells = (a, b, c, d, e, f_, g, h, i)
                    if any(x not in others and x not in bigs for x in (e, f_, g, h, i)):
                        continue
                    if g + h + i != m or a + e + i != m:
                        continue
                    if len(set(cells)) != 9:
                        continue
                    top = max(cells)
                    if top not in bigs:
                        continue
                    if any(x != top and x not in others for x in cells):
                        continue
                    grid = ((a, b, c), (d, e, f_), (g, h, i))
                    if validate_square(grid).is_magic:
                        found.append(grid)
    return found


@dataclass(frozen=True)
class AbsenceCandidate:
    branch: str  # "k" or "K": which defining distance is assumed square
    s: int
    t: int
    elements: tuple[int, ...]
    eliminated_by: tuple[str, int] | None  # (reason, element) or None

    def to_json(self) -> dict:
        return {
            "branch": self.branch,
            "s": self.s,
            "t": self.t,
            "elements": list(self.elements),
            "eliminated_by": list(self.eliminated_by) if self.eliminated_by else None,
        }


@dataclass(frozen=True)
class AbsenceCertificate:
    order: int
    constraint: str
    assumption: str
    bound: int
    verdict: str  # "absent" | "inconclusive"
    candidates: tuple[AbsenceCandidate, ...] = field(repr=False)

    @property
    def eliminated_count(self) -> int:
        return sum(1 for c in self.candidates if c.eliminated_by is not None)

    @property
    def survivors(self) -> tuple[AbsenceCandidate, ...]:
        return tuple(c for c in self.candidates if c.eliminated_by is None)

    def to_json(self) -> dict:
        return {
            "order": self.order,
            "constraint": self.constraint,
            "assumption": self.assumption,
            "bound": self.bound,
            "verdict": self.verdict,
            "candidates_total": len(self.candidates),
            "eliminated": self.eliminated_count,
            "survivors": [c.to_json() for c in self.survivors],
            "candidates": [c.to_json() for c in self.candidates],
        }

    def to_json_str(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def _probe_candidate(s_set: MarkedSet, elements: tuple[int, ...]) -> tuple[str, int] | None:
    for x in elements:
        if not s_set.membership(x):
            return ("unmarked", x)
    for x in elements:
        if not sum_of_two_squares(x):
            return ("not-sum-of-two-squares", x)
    return None


def certify_absence_squares(s_set: MarkedSet, n: int) -> AbsenceCertificate:
    """Certify absence of square-entry solutions with a square defining
    distance inside the marked set.

    Enumerates shifting constants l = s^2 and square defining distances
    k = t^2 (for order 3 also K = u^2); a candidate is eliminated when a
    required pattern element is unmarked or fails the two-squares necessary
    condition.  For n != 3 only solutions of the n-progression form are
    covered.
    """
    if n == 6:
        raise UnsupportedOrderError("order 6 has no covered solution form")
    if n < 3:
        raise DomainError(f"need n = 3 or n >= 4, got {n}")
    b = s_set.domain_size
    length = 3 if n == 3 else n
    # For order 3 the assumed-square distance may be k or K; either way the
    # pattern contains the 3-term progression l, l+d, l+2d, so one sweep
    # over (s, t) with d = t^2 covers both readings.
    branch = "k-or-K" if n == 3 else "k"
    candidates: list[AbsenceCandidate] = []
    s_val = 1
    while s_val * s_val <= b:
        l = s_val * s_val
        t_val = 1
        while l + (length - 1) * t_val * t_val <= b:
            step = t_val * t_val
            elements = tuple(l + i * step for i in range(length))
            candidates.append(
                AbsenceCandidate(
                    branch=branch,
                    s=s_val,
                    t=t_val,
                    elements=elements,
                    eliminated_by=_probe_candidate(s_set, elements),
                )
            )
            t_val += 1
        s_val += 1
    verdict = "absent" if all(c.eliminated_by for c in candidates) else "inconclusive"
    constraint = (
        "3x3 magic square of squares"
        if n == 3
        else f"order-{n} magic square of squares built from {n} progressions"
    )
    return AbsenceCertificate(
        order=n,
        constraint=constraint,
        assumption="at least one defining distance is a perfect square",
        bound=b,
        verdict=verdict,
        candidates=tuple(candidates),
    )
