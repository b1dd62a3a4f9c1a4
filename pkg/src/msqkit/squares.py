"""Magic-square model, 3x3 periodic-pattern characterization, and the
order-n construction from arithmetic progressions via orthogonal diagonal
Latin squares."""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

from .errors import (
    DegeneracyError,
    DomainError,
    ShapeError,
    UnsupportedOrderError,
    ValidationError,
)
from .latin import DiagonalLatinSquare, diagonal_latin_pair

__all__ = [
    "MagicSquare",
    "Pattern3x3",
    "ProgressionFamily",
    "WeightedSystem",
    "DiagonalLatinSquare",
    "SquareCheck",
    "magic_constant",
    "validate_square",
    "pattern3x3_generate",
    "pattern3x3_to_square",
    "decompose_3x3",
    "fiber_partition",
    "diagonal_latin_pair",
    "construct_order_n",
    "weighted_pattern_scan",
]


def magic_constant(n: int) -> int:
    """Common line sum of a normal order-n square, n(n^2+1)/2."""
    if n < 1:
        raise DomainError(f"order must be >= 1, got {n}")
    return n * (n * n + 1) // 2


class SquareCheck(NamedTuple):
    is_magic: bool
    magic_sum: int | None


def _as_grid(rows: Sequence[Sequence[int]]) -> tuple[tuple[int, ...], ...]:
    grid = tuple(tuple(int(x) for x in row) for row in rows)
    n = len(grid)
    if n == 0 or any(len(row) != n for row in grid):
        raise ShapeError("grid must be square and non-empty")
    return grid


def validate_square(rows: Sequence[Sequence[int]]) -> SquareCheck:
    """Check distinctness and all 2n+2 line sums of a candidate grid."""
    grid = _as_grid(rows)
    n = len(grid)
    entries = [x for row in grid for x in row]
    if len(set(entries)) != n * n:
        return SquareCheck(False, None)
    m = sum(grid[0])
    sums = [sum(row) for row in grid]
    sums += [sum(grid[i][j] for i in range(n)) for j in range(n)]
    sums.append(sum(grid[i][i] for i in range(n)))
    sums.append(sum(grid[i][n - 1 - i] for i in range(n)))
    if any(s != m for s in sums):
        return SquareCheck(False, None)
    return SquareCheck(True, m)


@dataclass(frozen=True)
class MagicSquare:
    """An n x n grid of pairwise distinct integers with equal line sums."""

    order: int
    entries: tuple[tuple[int, ...], ...]
    magic_sum: int

    @classmethod
    def from_grid(cls, rows: Sequence[Sequence[int]]) -> "MagicSquare":
        grid = _as_grid(rows)
        check = validate_square(grid)
        if not check.is_magic:
            raise ValidationError("grid is not a magic square")
        return cls(order=len(grid), entries=grid, magic_sum=check.magic_sum)

    def entry_multiset(self) -> tuple[int, ...]:
        return tuple(sorted(x for row in self.entries for x in row))

    def to_json(self) -> dict:
        return {
            "order": self.order,
            "entries": [x for row in self.entries for x in row],
            "magic_sum": self.magic_sum,
        }

    def to_json_str(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, obj: dict) -> "MagicSquare":
        n = int(obj["order"])
        flat = [int(x) for x in obj["entries"]]
        if len(flat) != n * n:
            raise ShapeError("entries length does not match order")
        grid = [flat[i * n : (i + 1) * n] for i in range(n)]
        square = cls.from_grid(grid)
        if "magic_sum" in obj and int(obj["magic_sum"]) != square.magic_sum:
            raise ValidationError("magic_sum field disagrees with grid")
        return square

    def to_text(self) -> str:
        width = max(len(str(x)) for row in self.entries for x in row)
        return "\n".join(
            " ".join(str(x).rjust(width) for x in row) for row in self.entries
        )


@dataclass(frozen=True)
class Pattern3x3:
    """Nine integers l + i*k + j*K (i,j in {0,1,2}): three length-3
    progressions with inner step k whose middle terms step by K."""

    l: int
    k: int
    K: int


def pattern3x3_generate(p: Pattern3x3) -> tuple[int, ...]:
    """The 9 pattern values, sorted; degenerate parameters raise."""
    by_value: dict[int, list[tuple[int, int]]] = {}
    for i in range(3):
        for j in range(3):
            by_value.setdefault(p.l + i * p.k + j * p.K, []).append((i, j))
    collisions = [pairs for pairs in by_value.values() if len(pairs) > 1]
    if collisions:
        raise DegeneracyError(
            "pattern values collide at (i,j) pairs: "
            + "; ".join(str(pairs) for pairs in collisions),
            collisions=collisions,
        )
    return tuple(sorted(by_value))


def _center_form(c: int, k: int, K: int) -> tuple[tuple[int, ...], ...]:
    return (
        (c + K, c - K - k, c + k),
        (c - K + k, c, c + K - k),
        (c - k, c + K + k, c - K),
    )


def pattern3x3_to_square(p: Pattern3x3) -> MagicSquare:
    """Lay the pattern out as a 3x3 magic square with center l + k + K."""
    values = pattern3x3_generate(p)
    c = p.l + p.k + p.K
    grid = _center_form(c, p.k, p.K)
    flat = sorted(x for row in grid for x in row)
    if flat != sorted(values):
        # cannot happen once pattern values are distinct; kept as a guard
        raise DegeneracyError("center-form layout does not match the pattern")
    return MagicSquare(order=3, entries=grid, magic_sum=3 * c)


def decompose_3x3(square: MagicSquare) -> Pattern3x3:
    """Recover (l, k, K) from an order-3 magic square.

    Every 3x3 magic square with distinct entries equals the center form on
    signed parameters (k0, K0) read off the top row; the pattern uses their
    absolute values and l is the smallest entry.
    """
    if square.order != 3:
        raise ValidationError(f"decompose_3x3 needs order 3, got {square.order}")
    check = validate_square(square.entries)
    if not check.is_magic:
        raise ValidationError("input square is not magic")
    grid = square.entries
    c = grid[1][1]
    if 3 * c != square.magic_sum:
        raise ValidationError("center cell must equal magic_sum / 3")
    k0 = grid[0][2] - c
    big0 = grid[0][0] - c
    if grid != _center_form(c, k0, big0):
        raise ValidationError("square does not match the center-form identity")
    k, big = abs(k0), abs(big0)
    pattern = Pattern3x3(l=c - k - big, k=k, K=big)
    if pattern3x3_generate(pattern) != square.entry_multiset():
        raise ValidationError("recovered pattern does not regenerate the square")
    return pattern


class FiberPartition(NamedTuple):
    classes: tuple[tuple[int, ...], ...]
    maxima: tuple[int, ...]


def fiber_partition(n: int) -> FiberPartition:
    """Partition [n^2] by repeatedly taking the smallest unused element of
    each residue class mod n; class i then has maximum i*n."""
    if n < 1:
        raise DomainError(f"order must be >= 1, got {n}")
    fibers = {r: [m for m in range(1, n * n + 1) if m % n == r] for r in range(n)}
    classes = []
    for _ in range(n):
        taken = sorted(fibers[r].pop(0) for r in range(n))
        classes.append(tuple(taken))
    return FiberPartition(
        classes=tuple(classes), maxima=tuple(max(c) for c in classes)
    )


@dataclass(frozen=True)
class ProgressionFamily:
    """n disjoint arithmetic progressions of length n with common step k."""

    n: int
    starts: tuple[int, ...]
    k: int

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"n must be >= 1, got {self.n}")
        if self.k < 1:
            raise DomainError(f"step must be >= 1, got {self.k}")
        starts = tuple(int(s) for s in self.starts)
        object.__setattr__(self, "starts", starts)
        if len(starts) != self.n:
            raise ValidationError(f"expected {self.n} starts, got {len(starts)}")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValidationError("starts must be strictly increasing")
        if len(set(self.elements())) != self.n * self.n:
            raise DegeneracyError("progressions are not pairwise disjoint")

    def progression(self, j: int) -> tuple[int, ...]:
        return tuple(self.starts[j] + i * self.k for i in range(self.n))

    def elements(self) -> tuple[int, ...]:
        return tuple(
            s + i * self.k for s in self.starts for i in range(self.n)
        )

    def to_json(self) -> dict:
        return {"n": self.n, "k": self.k, "starts": list(self.starts)}

    @classmethod
    def from_json(cls, obj: dict) -> "ProgressionFamily":
        return cls(n=int(obj["n"]), starts=tuple(obj["starts"]), k=int(obj["k"]))


def construct_order_n(fam: ProgressionFamily) -> MagicSquare:
    """Build an order-n magic square whose entries are the family elements.

    Superposes an orthogonal diagonal Latin pair: the first square selects a
    progression, the second a position inside it.  Orders 3 and 6 are not
    served by this construction.
    """
    n = fam.n
    if n in (3, 6) or n < 3:
        raise UnsupportedOrderError(
            f"construction supports n >= 4 with n != 6, got {n}"
        )
    lat1, lat2 = diagonal_latin_pair(n)
    grid = tuple(
        tuple(
            fam.starts[lat1.symbols[i][j] - 1] + (n - lat2.symbols[i][j]) * fam.k
            for j in range(n)
        )
        for i in range(n)
    )
    flat = [x for row in grid for x in row]
    if len(set(flat)) != n * n:
        raise DegeneracyError("entries collide after the pair bijection")
    m = sum(grid[0])
    return MagicSquare(order=n, entries=grid, magic_sum=m)


@dataclass(frozen=True)
class WeightedSystem:
    """The eight 3x3 line equations with positional weights:
    w_x * first + w_y * second + w_z * third = M."""

    w_x: int
    w_y: int
    w_z: int
    M: int

    def __post_init__(self):
        if min(self.w_x, self.w_y, self.w_z) < 1:
            raise DomainError("weights must be positive")

    @property
    def weights(self) -> tuple[int, int, int]:
        return (self.w_x, self.w_y, self.w_z)

    @property
    def occurrence_count(self) -> int:
        """How many stretched/squeezed copies of the base pattern occur:
        3 for pairwise distinct weights, 2 for exactly one equal pair, 1
        for equal weights."""
        distinct = len(set(self.weights))
        return {3: 3, 2: 2, 1: 1}[distinct]

    @property
    def scale_factors(self) -> tuple[Fraction, Fraction]:
        """Contraction factors w_c/w_a and w_c/w_b relative to the most
        stretched occurrence, where w_c is the largest weight."""
        ws = sorted(self.weights)
        return (Fraction(ws[2], ws[0]), Fraction(ws[1], ws[0]))


# Line triples of the 3x3 grid in cell order a..i (row-major).
_LINES = (
    (0, 1, 2), (3, 4, 5), (6, 7, 8),      # rows
    (0, 3, 6), (1, 4, 7), (2, 5, 8),      # columns
    (0, 4, 8), (2, 4, 6),                 # diagonals
)

_nullspace_cache: dict[tuple[int, int, int], tuple] = {}


def _weighted_nullspace(weights: tuple[int, int, int]):
    """Rational nullspace basis of the 8x9 weighted system, free cells h, i."""
    if weights in _nullspace_cache:
        return _nullspace_cache[weights]
    import sympy as sp

    rows = []
    for line in _LINES:
        row = [0] * 9
        for w, cell in zip(weights, line):
            row[cell] = w
        rows.append(row)
    basis = sp.Matrix(rows).nullspace()
    if len(basis) != 2:
        raise DomainError("weighted system does not have a 2-dim solution family")
    vecs = tuple(
        tuple(Fraction(sp.Rational(v)) for v in vec.T) for vec in basis
    )
    # Normalize so that the free coordinates (cells h=7, i=8) form the
    # identity, making the two coefficients equal to those cell values.
    a, b = vecs
    det = a[7] * b[8] - a[8] * b[7]
    if det == 0:
        raise DomainError("cells h, i are not free in this weighted system")
    u = tuple((b[8] * a[j] - a[8] * b[j]) / det for j in range(9))
    v = tuple((a[7] * b[j] - b[7] * a[j]) / det for j in range(9))
    _nullspace_cache[weights] = (u, v)
    return u, v


def weighted_pattern_scan(sys: WeightedSystem, marked) -> list[tuple[tuple[int, ...], ...]]:
    """Scan a marked set for solutions of the weighted 3x3 system.

    The solution family is two-dimensional with cells h and i free, so the
    scan ranges over pairs of marked values, checks that all nine cells come
    out integral, distinct and marked, and re-verifies the eight weighted
    equations.  With equal weights this reduces to a plain pattern scan.
    """
    values = sorted(marked.iter_marked()) if hasattr(marked, "iter_marked") else sorted(marked)
    if not values:
        return []
    value_set = set(values)
    u, v = _weighted_nullspace(sys.weights)
    part = Fraction(sys.M, sys.w_x + sys.w_y + sys.w_z)
    found = []
    for vh in values:
        ch = vh - part
        base = [part + ch * u[j] for j in range(9)]
        for vi in values:
            ci = vi - part
            cells = []
            ok = True
            for j in range(9):
                x = base[j] + ci * v[j]
                if x.denominator != 1:
                    ok = False
                    break
                cells.append(int(x))
            if not ok or len(set(cells)) != 9:
                continue
            if any(x not in value_set for x in cells):
                continue
            if all(
                sys.w_x * cells[p] + sys.w_y * cells[q] + sys.w_z * cells[r] == sys.M
                for p, q, r in _LINES
            ):
                found.append(tuple(tuple(cells[3 * r : 3 * r + 3]) for r in range(3)))
    return found
