"""Independent oracles shared across the test suite.

These deliberately avoid the package's own derivations: the 3x3 enumerator
fills grids from line equations, the DFT is the quadratic-time sum, the
two-squares test is a table of actual sums, and the weighted solver pivots
on different cells than the package's scan.
"""

from __future__ import annotations

import numpy as np


def enumerate_magic_3x3(lo: int, hi: int) -> list[tuple[tuple[int, ...], ...]]:
    """All 3x3 magic squares with distinct entries in [lo, hi]."""
    out = []
    values = range(lo, hi + 1)
    for a in values:
        for b in values:
            for c in values:
                m = a + b + c
                for d in values:
                    g = m - a - d
                    e = m - c - g
                    f = m - d - e
                    h = m - b - e
                    i = m - c - f
                    rest = (e, f, g, h, i)
                    if any(x < lo or x > hi for x in rest):
                        continue
                    cells = (a, b, c, d, e, f, g, h, i)
                    if len(set(cells)) != 9:
                        continue
                    if g + h + i != m or a + e + i != m:
                        continue
                    out.append(((a, b, c), (d, e, f), (g, h, i)))
    return out


def check_diagonal_latin(symbols) -> bool:
    n = len(symbols)
    full = set(range(1, n + 1))
    if any(set(row) != full for row in symbols):
        return False
    if any({symbols[i][j] for i in range(n)} != full for j in range(n)):
        return False
    if {symbols[i][i] for i in range(n)} != full:
        return False
    return {symbols[i][n - 1 - i] for i in range(n)} == full


def check_orthogonal(sym_a, sym_b) -> bool:
    n = len(sym_a)
    pairs = {(sym_a[i][j], sym_b[i][j]) for i in range(n) for j in range(n)}
    return len(pairs) == n * n


def naive_dft_probabilities(signs: np.ndarray) -> np.ndarray:
    """|Q^-1 sum_x s_x omega^{xk}|^2 by the direct quadratic sum."""
    q = signs.size
    xs = np.arange(q)
    out = np.empty(q)
    chunk = max(1, (1 << 22) // q)
    for k0 in range(0, q, chunk):
        ks = np.arange(k0, min(k0 + chunk, q))
        phases = np.exp(2j * np.pi * np.outer(ks, xs) / q)
        out[k0 : k0 + len(ks)] = np.abs(phases @ signs / q) ** 2
    return out


def sums_of_two_squares_up_to(limit: int) -> set[int]:
    table = set()
    x = 0
    while x * x <= limit:
        y = x
        while x * x + y * y <= limit:
            table.add(x * x + y * y)
            y += 1
        x += 1
    return table


def brute_force_weighted_211(m_target: int, lo: int, hi: int):
    """Solutions of the (2,1,1) weighted 3x3 system with entries in
    [lo, hi], found by pivoting on cells a, d, e."""
    out = []
    values = range(lo, hi + 1)
    for a in values:
        for d in values:
            g = m_target - 2 * a - d
            if not lo <= g <= hi:
                continue
            for e in values:
                num = m_target - e - g
                if num % 2:
                    continue
                c = num // 2
                b = m_target - 2 * a - c
                f = m_target - 2 * d - e
                h = m_target - 2 * b - e
                i = m_target - 2 * a - e
                cells = (a, b, c, d, e, f, g, h, i)
                if any(x < lo or x > hi for x in cells):
                    continue
                if len(set(cells)) != 9:
                    continue
                if 2 * c + f + i != m_target:
                    continue
                if 2 * g + h + i != m_target:
                    continue
                if 2 * c + e + g != m_target:
                    continue
                out.append(((a, b, c), (d, e, f), (g, h, i)))
    return out
