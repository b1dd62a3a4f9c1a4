"""End-to-end detection pipelines.

Algorithm 1: spectrum -> top peaks -> continued fractions -> progression
verification -> reconstruction -> classical check.

Algorithm 2: shifted-oracle autocorrelation -> triangular-peak tracing ->
spacing recovery -> anchored reconstruction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    AmbiguityError,
    DegeneracyError,
    DomainError,
    MsqError,
    ParameterError,
    RecoveryFailure,
    UnsupportedOrderError,
)
from .markedset import MarkedSet
from .qsim import ShotCounts, Spectrum, exact_spectrum, hadamard_test, sample, shifted_indicator
from .squares import (
    MagicSquare,
    Pattern3x3,
    ProgressionFamily,
    construct_order_n,
    pattern3x3_to_square,
    validate_square,
)

__all__ = [
    "PeriodCandidate",
    "AutocorrSignal",
    "DetectionReport",
    "Algorithm1Params",
    "RecoverParams",
    "continued_fraction_denominators",
    "top_peaks",
    "verify_progressions",
    "algorithm1",
    "autocorrelation",
    "autocorr_scan",
    "trace_peak",
    "recover_spacing",
    "algorithm2",
]

NO_SOLUTION_MESSAGE = "No solution of the prescribed form found."
NO_STRUCTURED_MESSAGE = "No structured solution found."


def continued_fraction_denominators(r: int, big_q: int, k_max: int) -> list[int]:
    """Denominators of the convergents of r/Q with denominator <= k_max.

    The trivial 0/1 convergent is excluded; r = 0 yields [1] (period one).
    """
    if big_q < 1 or not 0 <= r < big_q:
        raise DomainError(f"need 0 <= r < Q, got r={r}, Q={big_q}")
    if k_max < 1:
        raise ParameterError(f"k_max must be >= 1, got {k_max}")
    if r == 0:
        return [1]
    num, den = r, big_q
    quotients = []
    while num:
        quotients.append(den // num)
        den, num = num, den % num
    h_prev, h = 1, 0  # numerators
    k_prev, k = 0, 1  # denominators
    out = set()
    for a in quotients:
        h_prev, h = h, a * h + h_prev
        k_prev, k = k, a * k + k_prev
        if h >= 1 and k <= k_max:
            out.add(k)
    return sorted(out)


def _weight_array(source) -> np.ndarray:
    if isinstance(source, Spectrum):
        return np.asarray(source.probabilities, dtype=np.float64)
    if isinstance(source, ShotCounts):
        return np.asarray(source.counts, dtype=np.float64)
    return np.asarray(source, dtype=np.float64)


def top_peaks(source, m: int) -> list[int]:
    """The m highest-weight frequencies excluding k=0; ties favor smaller k."""
    if m < 1:
        raise ParameterError(f"m must be >= 1, got {m}")
    w = _weight_array(source)
    ks = [k for k in range(1, w.size) if w[k] > 0]
    ks.sort(key=lambda k: (-w[k], k))
    return ks[:m]


def _slide_to_start(membership: Callable[[int], int], rep: int, k: int, n: int, b: int) -> int | None:
    """Slide a representative left in steps of k to the first start whose
    full length-n progression is marked."""
    for j in range(n):
        start = rep - j * k
        if start < 1:
            return None
        if start + (n - 1) * k > b:
            continue
        if all(membership(start + i * k) for i in range(n)):
            return start
    return None


def verify_progressions(
    s: MarkedSet,
    k: int,
    n: int,
    representatives: Sequence[int] | None = None,
) -> ProgressionFamily | None:
    """Confirm a family of n fully-marked length-n progressions of step k.

    With representatives, each is slid to its progression start by membership
    probing; without them, an exhaustive ascending scan over starts serves as
    the classical fallback (O(B*n) membership probes).
    """
    if k < 1 or n < 1:
        raise DomainError("need k >= 1 and n >= 1")
    b = s.domain_size
    if representatives is not None:
        if len(representatives) != n:
            raise ParameterError(f"expected {n} representatives")
        starts = []
        for rep in representatives:
            if not 1 <= rep <= b or not s.membership(rep):
                return None
            start = _slide_to_start(s.membership, rep, k, n, b)
            if start is None:
                return None
            starts.append(start)
        starts = sorted(set(starts))
        if len(starts) != n:
            return None
    else:
        starts = []
        taken: set[int] = set()
        for x in s.iter_marked():
            if x + (n - 1) * k > b:
                break
            cells = [x + i * k for i in range(n)]
            if any(c in taken for c in cells):
                continue
            if all(s.membership(c) for c in cells):
                starts.append(x)
                taken.update(cells)
                if len(starts) == n:
                    break
        if len(starts) < n:
            return None
    try:
        return ProgressionFamily(n=n, starts=tuple(starts), k=k)
    except MsqError:
        return None


@dataclass(frozen=True)
class PeriodCandidate:
    frequency: int
    denominator: int
    convergent: tuple[int, int]
    score: float


@dataclass
class Algorithm1Params:
    shots: int = 0  # 0 -> use the exact spectrum
    m: int = 10
    k_max: int = 64
    representatives: tuple[int, ...] | None = None
    seed: int = 0
    max_candidates: int | None = None


@dataclass(frozen=True)
class DetectionReport:
    outcome: str  # "solution" | "none-of-form"
    square: MagicSquare | None
    family: ProgressionFamily | None
    candidates_examined: int
    shots_used: int
    seed: int
    message: str | None = None

    def to_json(self) -> dict:
        return {
            "outcome": self.outcome,
            "square": self.square.to_json() if self.square else None,
            "family": self.family.to_json() if self.family else None,
            "candidates_examined": self.candidates_examined,
            "shots_used": self.shots_used,
            "seed": self.seed,
            "message": self.message,
        }

    def to_json_str(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def _convergent_for(r: int, big_q: int, k: int) -> tuple[int, int]:
    if r == 0:
        return (0, 1)
    from fractions import Fraction

    approx = Fraction(r, big_q).limit_denominator(k)
    return (approx.numerator, approx.denominator)


def period_candidates(weights, big_q: int, m: int, k_max: int) -> list[PeriodCandidate]:
    """Aggregate continued-fraction denominators over the top peaks."""
    w = _weight_array(weights)
    peaks = top_peaks(w, m)
    scores: dict[int, float] = {}
    best_freq: dict[int, int] = {}
    for r in peaks:
        for k in continued_fraction_denominators(r, big_q, k_max):
            scores[k] = scores.get(k, 0.0) + float(w[r])
            if k not in best_freq or w[r] > w[best_freq[k]]:
                best_freq[k] = r
    out = [
        PeriodCandidate(
            frequency=best_freq[k],
            denominator=k,
            convergent=_convergent_for(best_freq[k], big_q, k),
            score=score,
        )
        for k, score in scores.items()
    ]
    out.sort(key=lambda c: (-c.score, c.denominator))
    return out


def _reconstruct(fam: ProgressionFamily) -> MagicSquare | None:
    """Family -> candidate square via the 3x3 pattern or the order-n build."""
    if fam.n == 3:
        k_outer = fam.starts[1] - fam.starts[0]
        if fam.starts[2] - fam.starts[1] != k_outer:
            return None
        try:
            return pattern3x3_to_square(
                Pattern3x3(l=fam.starts[0], k=fam.k, K=k_outer)
            )
        except DegeneracyError:
            return None
    try:
        return construct_order_n(fam)
    except (DegeneracyError, UnsupportedOrderError):
        return None


def _classically_verified(s: MarkedSet, square: MagicSquare) -> bool:
    entries = [x for row in square.entries for x in row]
    if any(not 1 <= x <= s.domain_size or not s.membership(x) for x in entries):
        return False
    return validate_square(square.entries).is_magic


def algorithm1(s: MarkedSet, n: int, params: Algorithm1Params | None = None) -> DetectionReport:
    """QFT-based detection of a magic-square solution of the prescribed form."""
    params = params or Algorithm1Params()
    if n == 6:
        raise UnsupportedOrderError("no reconstruction is defined for order 6")
    if n < 3:
        raise DomainError(f"detection needs n >= 3, got {n}")
    spectrum = exact_spectrum(s)
    if params.shots > 0:
        weights = sample(spectrum, params.shots, params.seed)
        shots_used = params.shots
    else:
        weights = spectrum
        shots_used = 0
    candidates = period_candidates(weights, s.domain_size, params.m, params.k_max)
    if params.max_candidates is not None:
        candidates = candidates[: params.max_candidates]
    examined = 0
    for cand in candidates:
        examined += 1
        fam = verify_progressions(s, cand.denominator, n, params.representatives)
        if fam is None:
            continue
        square = _reconstruct(fam)
        if square is None or not _classically_verified(s, square):
            continue
        return DetectionReport(
            outcome="solution",
            square=square,
            family=fam,
            candidates_examined=examined,
            shots_used=shots_used,
            seed=params.seed,
        )
    return DetectionReport(
        outcome="none-of-form",
        square=None,
        family=None,
        candidates_examined=examined,
        shots_used=shots_used,
        seed=params.seed,
        message=NO_SOLUTION_MESSAGE,
    )


def autocorrelation(s: MarkedSet, shift: int) -> int:
    """C(shift) = |S intersect (S - shift)|, truncated at the domain border."""
    if abs(shift) >= s.domain_size:
        return 0
    return (s.mask & (s.mask >> abs(shift))).bit_count()


@dataclass
class AutocorrSignal:
    """Shift -> overlap values, exact or Hadamard-test-estimated."""

    values: dict[int, float] = field(default_factory=dict)
    n: int | None = None
    k: int | None = None
    B: int | None = None

    def to_csv(self) -> str:
        lines = ["s,value"]
        for shift in sorted(self.values):
            v = self.values[shift]
            lines.append(f"{shift},{int(v) if float(v).is_integer() else repr(v)}")
        return "\n".join(lines) + "\n"


def autocorr_scan(s: MarkedSet, s_from: int, s_to: int, n: int | None = None, k: int | None = None) -> AutocorrSignal:
    if s_from > s_to:
        raise ParameterError("need s_from <= s_to")
    sig = AutocorrSignal(n=n, k=k, B=s.domain_size)
    for shift in range(s_from, s_to + 1):
        sig.values[shift] = float(autocorrelation(s, shift))
    return sig


def trace_peak(
    source: Callable[[int], float],
    s_start: int,
    k: int,
    max_steps: int = 64,
) -> int:
    """Hill-climb a triangular autocorrelation peak sampled at steps of k.

    Two probes on each side of the current shift classify the local shape;
    a clean symmetric tent resolves the center in exactly four evaluations.
    Flat or inconsistent neighborhoods raise AmbiguityError carrying the
    evaluated points.
    """
    if k < 1:
        raise ParameterError(f"step must be >= 1, got {k}")
    cache: dict[int, float] = {}

    def f(shift: int) -> float:
        if shift not in cache:
            cache[shift] = float(source(shift))
        return cache[shift]

    s = s_start
    for _ in range(max_steps):
        l2, l1, r1, r2 = f(s - 2 * k), f(s - k), f(s + k), f(s + 2 * k)
        if l2 == l1 == r1 == r2:
            raise AmbiguityError(
                f"flat neighborhood around shift {s}", evaluations=cache
            )
        if l1 == r1 and l2 == r2 and l2 < l1:
            return s  # symmetric tent centered here
        if r1 >= l1:
            if r2 > r1:
                s += 2 * k
                continue
            v0 = f(s)
            if v0 > l1 and v0 > r1:
                return s
            if r1 > v0 and r1 > r2:
                return s + k
        else:
            if l2 > l1:
                s -= 2 * k
                continue
            v0 = f(s)
            if v0 > l1 and v0 > r1:
                return s
            if l1 > v0 and l1 > l2:
                return s - k
        raise AmbiguityError(
            f"ambiguous neighborhood around shift {s}", evaluations=cache
        )
    raise AmbiguityError(
        f"no local maximum within {max_steps} tracing steps", evaluations=cache
    )


@dataclass
class RecoverParams:
    shots: int | None = 0  # 0 -> exact overlaps; None -> accuracy-derived budget
    s_max: int | None = None
    seed: int = 0
    max_candidates: int = 8


def _default_shift_shots(n: int, b: int) -> int:
    # ceil(9 / eps^2) with eps = half the normalized one-step drop 4(n-1)/B
    eps = 2.0 * (n - 1) / b
    return int(np.ceil(9.0 / (eps * eps)))


def _estimated_overlap_source(s: MarkedSet, shots: int, seed: int) -> Callable[[int], float]:
    b = s.domain_size
    ones = s.popcount

    def source(shift: int) -> float:
        sub_seed = np.random.SeedSequence(entropy=seed, spawn_key=(abs(shift),))
        rng = np.random.Generator(np.random.Philox(sub_seed))
        res = hadamard_test(s, shift)
        p_one = (1.0 - res.exact) / 2.0
        flips = int(rng.binomial(shots, p_one))
        est = (shots - 2 * flips) / shots
        d_est = b * (1.0 - est) / 2.0
        shifted_ones = shifted_indicator(s, shift).popcount
        return (ones + shifted_ones - d_est) / 2.0

    return source


def recover_spacing_from_source(
    source: Callable[[int], float],
    k: int,
    n: int,
    b: int,
    s_max: int,
    max_candidates: int = 8,
) -> int:
    """Locate the first off-center autocorrelation peak and return its center.

    Probes blocks of k consecutive shifts every floor((n-1)k/2) positions so
    that some probe lands on the peak's lattice regardless of D mod k, then
    seeds trace_peak at the strongest lattice point around the hit.  A traced
    center c must clear a strength threshold (additive noise can only raise
    the true center above n(n-1) minus the tolerated perturbation), must show
    the second-harmonic peak at 2c when that is in range, and is re-traced
    from c/2 when the half shift is itself hot (c was the second peak).
    """
    if n < 2 or k < 1:
        raise DomainError("need n >= 2 and k >= 1")
    support = (n - 1) * k
    s_min = support + 1
    stride = max(1, support // 2)
    tau = (n - 1) ** 2 / 2.0
    tau2 = (n - 2) * n / 2.0
    tau_center = (n - 1) * (2 * n - 1) / 2.0

    def harmonic(shift: int) -> float:
        return source(2 * shift) if 2 * shift <= s_max else float("-inf")

    def trace_region(hint: int) -> int | None:
        lattice = [
            hint + j * k
            for j in range(-(n - 1), n)
            if s_min <= hint + j * k <= s_max
        ]
        if not lattice:
            return None
        seed_shift = max(lattice, key=source)
        try:
            return trace_peak(source, seed_shift, k)
        except AmbiguityError as exc:
            # apex ties happen under noise: prefer the tied shift whose
            # second harmonic is strongest
            evals = {
                t: v for t, v in exc.evaluations.items() if s_min <= t <= s_max
            }
            if not evals:
                return None
            top = sorted(evals, key=lambda t: (-evals[t], t))[:3]
            return max(top, key=lambda t: (harmonic(t), evals[t], -t))

    def validate(center: int) -> bool:
        if center <= 2 * support or center > s_max:
            return False
        if source(center) < tau_center:
            return False
        if n >= 3 and 2 * center <= s_max and source(2 * center) < tau2:
            return False
        return True

    def resolve(center: int) -> int | None:
        if center % 2 == 0:
            half = center // 2
            if half > support and source(half) >= tau:
                refined = trace_region(half)
                if refined is not None and refined != center and validate(refined):
                    return refined
                return None
        return center if validate(center) else None

    probes: list[int] = []
    g = s_min
    while g <= s_max:
        probes.extend(t for t in range(g, min(g + k, s_max + 1)))
        g += stride
    probes = sorted(set(probes))
    examined = 0
    idx = 0
    while idx < len(probes) and examined < max_candidates:
        shift = probes[idx]
        idx += 1
        if source(shift) < tau:
            continue
        examined += 1
        center = trace_region(shift)
        if center is None:
            continue
        resolved = resolve(center)
        if resolved is not None:
            return resolved
    raise RecoveryFailure(
        f"no verified off-center peak found within s_max={s_max}"
    )


def recover_spacing(s: MarkedSet, k: int, n: int, params: RecoverParams | None = None) -> int:
    """Recover the spacing D between equally-spaced progression starts."""
    params = params or RecoverParams()
    b = s.domain_size
    s_max = params.s_max if params.s_max is not None else b // 2
    if params.shots == 0:
        source: Callable[[int], float] = lambda shift: float(autocorrelation(s, shift))
    else:
        shots = params.shots or _default_shift_shots(n, b)
        source = _estimated_overlap_source(s, shots, params.seed)
    cache: dict[int, float] = {}

    def cached(shift: int) -> float:
        if shift not in cache:
            cache[shift] = source(shift)
        return cache[shift]

    return recover_spacing_from_source(
        cached, k, n, b, s_max, max_candidates=params.max_candidates
    )


def anchor_start(
    membership: Callable[[int], int], spacing: int, k: int, n: int, b: int
) -> int | None:
    """Leftmost x whose full grid {x + j*spacing + i*k} is marked."""
    span = (n - 1) * spacing + (n - 1) * k
    for x in range(1, b - span + 1):
        if not membership(x):
            continue
        if all(
            membership(x + j * spacing + i * k)
            for j in range(n)
            for i in range(n)
        ):
            return x
    return None


def algorithm2(s: MarkedSet, k: int, n: int, params: RecoverParams | None = None) -> DetectionReport:
    """Shifted-oracle recovery of an equally-spaced family and its square."""
    params = params or RecoverParams()
    if n < 4 or n == 6:
        raise UnsupportedOrderError(
            f"structured reconstruction needs n >= 4, n != 6, got {n}"
        )
    shots_used = 0 if params.shots == 0 else (params.shots or _default_shift_shots(n, s.domain_size))
    try:
        spacing = recover_spacing(s, k, n, params)
    except RecoveryFailure:
        return DetectionReport(
            outcome="none-of-form",
            square=None,
            family=None,
            candidates_examined=params.max_candidates,
            shots_used=shots_used,
            seed=params.seed,
            message=NO_STRUCTURED_MESSAGE,
        )
    anchor = anchor_start(s.membership, spacing, k, n, s.domain_size)
    report_fail = DetectionReport(
        outcome="none-of-form",
        square=None,
        family=None,
        candidates_examined=1,
        shots_used=shots_used,
        seed=params.seed,
        message=NO_STRUCTURED_MESSAGE,
    )
    if anchor is None:
        return report_fail
    try:
        fam = ProgressionFamily(
            n=n, starts=tuple(anchor + j * spacing for j in range(n)), k=k
        )
    except MsqError:
        return report_fail
    square = _reconstruct(fam)
    if square is None or not _classically_verified(s, square):
        return report_fail
    return DetectionReport(
        outcome="solution",
        square=square,
        family=fam,
        candidates_examined=1,
        shots_used=shots_used,
        seed=params.seed,
    )
