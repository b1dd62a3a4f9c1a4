"""Orthogonal diagonal Latin square pairs.

Strategy by order: linear construction when gcd(n, 6) = 1, a finite-field
construction for prime powers, a product construction for composite orders
with two usable factors, and a backtracking search for the leftovers up to
order 12.  Orders 1, 2, 3 and 6 admit no orthogonal diagonal pair.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from math import gcd

from .errors import ResourceError, UnsupportedOrderError, ValidationError

__all__ = [
    "DiagonalLatinSquare",
    "diagonal_latin_pair",
    "is_diagonal_latin",
    "are_orthogonal",
]

_BACKTRACK_MAX = 12


@dataclass(frozen=True)
class DiagonalLatinSquare:
    """Latin square over symbols {1..n} whose two main diagonals are
    transversals."""

    order: int
    symbols: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if not is_diagonal_latin(self.symbols):
            raise ValidationError("grid is not a diagonal Latin square")


def is_diagonal_latin(symbols) -> bool:
    n = len(symbols)
    full = set(range(1, n + 1))
    rows_ok = all(set(row) == full for row in symbols)
    cols_ok = all({symbols[i][j] for i in range(n)} == full for j in range(n))
    diag_ok = {symbols[i][i] for i in range(n)} == full
    anti_ok = {symbols[i][n - 1 - i] for i in range(n)} == full
    return rows_ok and cols_ok and diag_ok and anti_ok


def are_orthogonal(a: DiagonalLatinSquare, b: DiagonalLatinSquare) -> bool:
    n = a.order
    if b.order != n:
        return False
    pairs = {
        (a.symbols[i][j], b.symbols[i][j]) for i in range(n) for j in range(n)
    }
    return len(pairs) == n * n


def _linear_pair(n: int):
    # (i + 2j, 2i + j) mod n; needs 2, 3 invertible, i.e. gcd(n, 6) = 1
    sq1 = tuple(
        tuple((i + 2 * j) % n + 1 for j in range(n)) for i in range(n)
    )
    sq2 = tuple(
        tuple((2 * i + j) % n + 1 for j in range(n)) for i in range(n)
    )
    return sq1, sq2


def _prime_power(n: int):
    """(p, e) with n = p^e for prime p, else None."""
    if n < 2:
        return None
    m = n
    p = None
    for d in range(2, n + 1):
        if d * d > m:
            break
        if m % d == 0:
            p = d
            while m % d == 0:
                m //= d
            break
    if p is None:
        return (n, 1)
    if m != 1:
        return None
    e = 0
    while n > 1:
        n //= p
        e += 1
    return (p, e)


class _GF:
    """Small finite field GF(p^e); elements are ints encoding coefficient
    vectors base p."""

    def __init__(self, p: int, e: int):
        self.p = p
        self.e = e
        self.q = p**e
        self.modpoly = self._find_irreducible()

    def _digits(self, x: int, length: int) -> list[int]:
        out = []
        for _ in range(length):
            out.append(x % self.p)
            x //= self.p
        return out

    def _encode(self, digits: list[int]) -> int:
        out = 0
        for c in reversed(digits):
            out = out * self.p + c
        return out

    def _polymulmod(self, a: list[int], b: list[int], mod: list[int]) -> list[int]:
        p = self.p
        out = [0] * (len(a) + len(b) - 1)
        for i, ai in enumerate(a):
            if ai:
                for j, bj in enumerate(b):
                    out[i + j] = (out[i + j] + ai * bj) % p
        deg_mod = len(mod) - 1
        while len(out) > deg_mod:
            lead = out[-1]
            if lead:
                shift = len(out) - 1 - deg_mod
                for i in range(len(mod)):
                    out[shift + i] = (out[shift + i] - lead * mod[i]) % p
            out.pop()
        while len(out) < deg_mod:
            out.append(0)
        return out

    def _polydivides(self, d: list[int], poly: list[int]) -> bool:
        p = self.p
        rem = list(poly)
        inv_lead = pow(d[-1], -1, p)
        while len(rem) >= len(d):
            factor = rem[-1] * inv_lead % p
            shift = len(rem) - len(d)
            for i in range(len(d)):
                rem[shift + i] = (rem[shift + i] - factor * d[i]) % p
            rem.pop()
        return not any(rem)

    def _is_irreducible(self, poly: list[int]) -> bool:
        deg = len(poly) - 1
        for d in range(1, deg // 2 + 1):
            for enc in range(self.p**d):
                cand = self._digits(enc, d) + [1]
                if self._polydivides(cand, poly):
                    return False
        return True

    def _find_irreducible(self) -> list[int]:
        if self.e == 1:
            return [0, 1]
        for enc in range(self.q):
            poly = self._digits(enc, self.e) + [1]
            if self._is_irreducible(poly):
                return poly
        raise ValidationError("no irreducible polynomial found")  # unreachable

    def add(self, x: int, y: int) -> int:
        dx = self._digits(x, self.e)
        dy = self._digits(y, self.e)
        return self._encode([(a + b) % self.p for a, b in zip(dx, dy)])

    def neg(self, x: int) -> int:
        return self._encode([(-a) % self.p for a in self._digits(x, self.e)])

    def mul(self, x: int, y: int) -> int:
        prod = self._polymulmod(
            self._digits(x, self.e), self._digits(y, self.e), self.modpoly
        )
        return self._encode(prod)


def _field_pair(n: int):
    """Orthogonal diagonal pair over GF(n) with a reversal-symmetric
    element enumeration, for prime powers n >= 4."""
    p, e = _prime_power(n)
    gf = _GF(p, e)
    if p == 2:
        c = 1
        reps = sorted(x for x in range(n) if x < gf.add(x, c))
        enum = reps + [gf.add(r, c) for r in reversed(reps)]
        bad = {0, 1}
    else:
        reps = sorted(x for x in range(1, n) if x < gf.neg(x))
        enum = [gf.neg(r) for r in reversed(reps)] + [0] + reps
        one = 1
        bad = {0, one, gf.neg(one)}
    coeffs = [a for a in range(n) if a not in bad][:2]
    index = {x: i for i, x in enumerate(enum)}
    squares = []
    for a in coeffs:
        sym = tuple(
            tuple(index[gf.add(gf.mul(a, enum[i]), enum[j])] + 1 for j in range(n))
            for i in range(n)
        )
        squares.append(sym)
    return squares[0], squares[1]


def _product_pair(n: int):
    """Direct product of two smaller orthogonal diagonal pairs, when n splits
    into two supported factors."""
    for a in range(4, n):
        if n % a:
            continue
        b = n // a
        if b < 4 or a == 6 or b == 6:
            continue
        try:
            a1, a2 = diagonal_latin_pair(a)
            b1, b2 = diagonal_latin_pair(b)
        except UnsupportedOrderError:
            continue

        def combine(big, small):
            return tuple(
                tuple(
                    (big.symbols[i1][j1] - 1) * b + small.symbols[i2][j2]
                    for j1 in range(a)
                    for j2 in range(b)
                )
                for i1 in range(a)
                for i2 in range(b)
            )

        return combine(a1, b1), combine(a2, b2)
    return None


class _SearchBudget:
    def __init__(self, nodes: int):
        self.left = nodes

    def spend(self):
        self.left -= 1
        if self.left <= 0:
            raise ResourceError("Latin pair search budget exhausted")


def _find_diagonal_square(n: int, budget: _SearchBudget, seed: int):
    """One diagonal Latin square by DFS with seed-shuffled value order."""
    import random

    rng = random.Random(seed)
    full = (1 << n) - 1
    rows = [full] * n
    cols = [full] * n
    diag = [full, full]
    grid = [[0] * n for _ in range(n)]

    def dfs(idx):
        if idx == n * n:
            return True
        budget.spend()
        i, j = divmod(idx, n)
        m = rows[i] & cols[j]
        if i == j:
            m &= diag[0]
        if i + j == n - 1:
            m &= diag[1]
        bits = []
        while m:
            b = m & -m
            m ^= b
            bits.append(b)
        rng.shuffle(bits)
        for b in bits:
            rows[i] &= ~b
            cols[j] &= ~b
            if i == j:
                diag[0] &= ~b
            if i + j == n - 1:
                diag[1] &= ~b
            grid[i][j] = b.bit_length()
            if dfs(idx + 1):
                return True
            rows[i] |= b
            cols[j] |= b
            if i == j:
                diag[0] |= b
            if i + j == n - 1:
                diag[1] |= b
        return False

    return tuple(tuple(r) for r in grid) if dfs(0) else None


def _find_orthogonal_mate(l1, budget: _SearchBudget):
    """Diagonal Latin square orthogonal to the fixed square l1, or None."""
    n = len(l1)
    full = (1 << n) - 1
    rows = [full] * n
    cols = [full] * n
    diag = [full, full]
    pair = [full] * (n + 1)  # pair[v1] = still-available mate symbols
    grid = [[0] * n for _ in range(n)]

    def dfs(idx):
        if idx == n * n:
            return True
        budget.spend()
        i, j = divmod(idx, n)
        m = rows[i] & cols[j] & pair[l1[i][j]]
        if i == j:
            m &= diag[0]
        if i + j == n - 1:
            m &= diag[1]
        while m:
            b = m & -m
            m ^= b
            rows[i] &= ~b
            cols[j] &= ~b
            pair[l1[i][j]] &= ~b
            if i == j:
                diag[0] &= ~b
            if i + j == n - 1:
                diag[1] &= ~b
            grid[i][j] = b.bit_length()
            if dfs(idx + 1):
                return True
            rows[i] |= b
            cols[j] |= b
            pair[l1[i][j]] |= b
            if i == j:
                diag[0] |= b
            if i + j == n - 1:
                diag[1] |= b
        return False

    return tuple(tuple(r) for r in grid) if dfs(0) else None


def _backtrack_pair(n: int, node_budget: int):
    """Restarted two-phase search: pick a diagonal square, then look for an
    orthogonal diagonal mate.  Raises ResourceError when the node budget is
    exhausted (orders 10 and 12 routinely need more than a desk budget)."""
    budget = _SearchBudget(node_budget)
    mate_slice = max(1, node_budget // 8)
    seed = 0
    while True:
        l1 = _find_diagonal_square(n, budget, seed)
        seed += 1
        if l1 is None:
            continue
        mate_budget = _SearchBudget(min(mate_slice, budget.left))
        try:
            l2 = _find_orthogonal_mate(l1, mate_budget)
        except ResourceError:
            budget.left -= mate_slice
            if budget.left <= 0:
                raise ResourceError("Latin pair search budget exhausted")
            continue
        if l2 is not None:
            return l1, l2


_pair_cache: dict[int, tuple[DiagonalLatinSquare, DiagonalLatinSquare]] = {}
_pair_lock = threading.Lock()


def diagonal_latin_pair(
    n: int, search_budget: int = 2_000_000
) -> tuple[DiagonalLatinSquare, DiagonalLatinSquare]:
    """A pair of orthogonal diagonal Latin squares of order n.

    Orders with gcd(n, 6) = 1, prime-power orders, and products of two
    supported factors are built algebraically; the remaining orders up to
    12 fall back to a budgeted backtracking search (which raises
    ResourceError when the budget runs out, as it will for 10 and 12 at
    desk scale).  Pairs do not exist for orders 1, 2, 3, 6.  Results are
    cached per order.
    """
    if n in (1, 2, 3, 6):
        raise UnsupportedOrderError(
            f"no orthogonal diagonal Latin pair exists for order {n}"
        )
    if n < 1:
        raise UnsupportedOrderError(f"order must be positive, got {n}")
    with _pair_lock:
        if n in _pair_cache:
            return _pair_cache[n]
    if gcd(n, 6) == 1:
        raw = _linear_pair(n)
    elif _prime_power(n) is not None:
        raw = _field_pair(n)
    else:
        raw = _product_pair(n)
        if raw is None:
            if n > _BACKTRACK_MAX:
                raise UnsupportedOrderError(
                    f"order {n} is beyond the backtracking limit {_BACKTRACK_MAX}"
                )
            raw = _backtrack_pair(n, search_budget)
    pair = (
        DiagonalLatinSquare(order=n, symbols=raw[0]),
        DiagonalLatinSquare(order=n, symbols=raw[1]),
    )
    if not are_orthogonal(*pair):
        raise ValidationError(f"constructed pair for order {n} is not orthogonal")
    with _pair_lock:
        _pair_cache[n] = pair
    return pair
