"""Exact and sampled simulation of the quantum primitives: uniform
superposition, phase oracle, QFT, measurement sampling, shifted oracles,
and the Hadamard test.

Phase convention: omega = exp(+2*pi*i/Q); frequencies are reported in
0..Q-1.  The ancilla compute/uncompute pair behind the phase oracle is not
materialized because the post-uncompute state is identical to applying the
phase directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ParameterError, ResourceError, ShapeError
from .markedset import MarkedSet, _rng

__all__ = [
    "DEFAULT_Q_MAX",
    "StateVector",
    "Spectrum",
    "ShotCounts",
    "HadamardResult",
    "uniform_state",
    "apply_phase_oracle",
    "qft",
    "exact_spectrum",
    "sample",
    "shifted_indicator",
    "hadamard_test",
    "spectrum_to_csv",
    "counts_to_csv",
]

DEFAULT_Q_MAX = 20

_NORM_TOL = 1e-10


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class StateVector:
    q: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (1 << self.q,):
            raise ShapeError(
                f"expected {1 << self.q} amplitudes, got shape {amps.shape}"
            )
        norm = float(np.sum(np.abs(amps) ** 2))
        if abs(norm - 1.0) > _NORM_TOL:
            raise ShapeError(f"state norm^2 = {norm} is not 1 within {_NORM_TOL}")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @property
    def dimension(self) -> int:
        return 1 << self.q


@dataclass(frozen=True)
class Spectrum:
    """Exact Fourier probabilities |alpha_k|^2 over frequencies 0..Q-1."""

    Q: int
    probabilities: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=np.float64)
        if p.shape != (self.Q,):
            raise ShapeError(f"expected {self.Q} probabilities")
        if np.any(p < -_NORM_TOL):
            raise ShapeError("negative probability")
        if abs(float(p.sum()) - 1.0) > _NORM_TOL:
            raise ShapeError("probabilities do not sum to 1 within 1e-10")
        object.__setattr__(self, "probabilities", _frozen(np.clip(p, 0.0, None)))


@dataclass(frozen=True)
class ShotCounts:
    Q: int
    counts: np.ndarray
    shots: int
    seed: int

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.shape != (self.Q,):
            raise ShapeError(f"expected {self.Q} counts")
        if int(c.sum()) != self.shots:
            raise ShapeError("counts do not sum to the shot total")
        object.__setattr__(self, "counts", _frozen(c))


class HadamardResult(NamedTuple):
    exact: float
    estimate: float | None


def uniform_state(q: int, q_max: int = DEFAULT_Q_MAX) -> StateVector:
    """Uniform superposition: all amplitudes 2^{-q/2}."""
    if not 1 <= q <= q_max:
        raise ResourceError(f"q={q} outside supported range [1, {q_max}]")
    dim = 1 << q
    return StateVector(q=q, amplitudes=np.full(dim, dim**-0.5, dtype=np.complex128))


def _sign_vector(s: MarkedSet) -> np.ndarray:
    return 1.0 - 2.0 * s.bit_array().astype(np.float64)


def apply_phase_oracle(state: StateVector, s: MarkedSet) -> StateVector:
    """U_f |x> = (-1)^{f(x)} |x>, with basis index j meaning domain point j+1."""
    if state.q != s.q:
        raise ShapeError(f"state has q={state.q} but oracle has q={s.q}")
    return StateVector(q=state.q, amplitudes=state.amplitudes * _sign_vector(s))


def qft(state: StateVector) -> StateVector:
    """out_k = Q^{-1/2} sum_x omega^{xk} amp_x, omega = exp(+2 pi i / Q)."""
    dim = state.dimension
    out = np.fft.ifft(state.amplitudes) * np.sqrt(dim)
    return StateVector(q=state.q, amplitudes=out)


def exact_spectrum(s: MarkedSet) -> Spectrum:
    """Measurement distribution after uniform state -> U_f -> QFT."""
    b = s.domain_size
    coeffs = np.fft.ifft(_sign_vector(s))
    return Spectrum(Q=b, probabilities=np.abs(coeffs) ** 2)


def sample(spec: Spectrum, shots: int, seed: int) -> ShotCounts:
    """shots i.i.d. categorical draws from the spectrum."""
    if shots < 1:
        raise ParameterError(f"shots must be >= 1, got {shots}")
    p = spec.probabilities / spec.probabilities.sum()
    counts = _rng(seed).multinomial(shots, p)
    return ShotCounts(Q=spec.Q, counts=counts.astype(np.int64), shots=shots, seed=seed)


def shifted_indicator(s: MarkedSet, shift: int, cyclic: bool = False) -> MarkedSet:
    """Marked set of f_s(x) = f(x+s), zero where x+s leaves the domain.

    The cyclic variant wraps around instead of truncating; truncation is
    the default, tested contract.
    """
    b = s.domain_size
    full = (1 << b) - 1
    if cyclic:
        shift %= b
        mask = ((s.mask >> shift) | (s.mask << (b - shift))) & full
    elif shift >= 0:
        mask = s.mask >> shift
    else:
        mask = (s.mask << -shift) & full
    return MarkedSet(q=s.q, mask=mask)


def hadamard_test(s: MarkedSet, shift: int, shots: int = 0, seed: int = 0) -> HadamardResult:
    """Control-qubit Z expectation for the composed oracle U_f U_f^(s).

    exact = B^{-1} sum_x (-1)^{f(x) + f_s(x)} = 1 - 2 d(shift)/B where d
    counts positions where f and its shift disagree.  With shots > 0, the
    estimate is (#zeros - #ones)/shots from Bernoulli draws with success
    probability (1 + exact)/2.
    """
    b = s.domain_size
    diff = (s.mask ^ shifted_indicator(s, shift).mask).bit_count()
    exact = 1.0 - 2.0 * diff / b
    if shots <= 0:
        return HadamardResult(exact=exact, estimate=None)
    p_one = (1.0 - exact) / 2.0
    ones = int(_rng(seed).binomial(shots, p_one))
    return HadamardResult(exact=exact, estimate=(shots - 2 * ones) / shots)


def spectrum_to_csv(spec: Spectrum) -> str:
    lines = ["k,probability"]
    lines += [f"{k},{p!r}" for k, p in enumerate(spec.probabilities.tolist())]
    return "\n".join(lines) + "\n"


def counts_to_csv(counts: ShotCounts) -> str:
    lines = ["k,count"]
    lines += [f"{k},{c}" for k, c in enumerate(counts.counts.tolist())]
    return "\n".join(lines) + "\n"
