"""The two figure configurations, each reproducible as one call.

qft-shots: 13 arithmetic progressions of length 13, common difference 5,
shifts 68*i, domain 2^10, noise filled to 50% ones density.

autocorr: 6 progressions of length 6, step 2, start spacing 25, domain
2^8, Bernoulli noise at density 0.1.
"""

from __future__ import annotations

from .markedset import MarkedSet, NoiseSpec, apply_noise, from_progressions
from .squares import ProgressionFamily

__all__ = [
    "QFT_SHOTS_Q",
    "QFT_SHOTS_N",
    "QFT_SHOTS_K",
    "AUTOCORR_Q",
    "AUTOCORR_N",
    "AUTOCORR_K",
    "AUTOCORR_SPACING",
    "qft_shots_family",
    "qft_shots_set",
    "autocorr_family",
    "autocorr_set",
]

QFT_SHOTS_Q = 10
QFT_SHOTS_N = 13
QFT_SHOTS_K = 5
QFT_SHOTS_DENSITY = 0.5

AUTOCORR_Q = 8
AUTOCORR_N = 6
AUTOCORR_K = 2
AUTOCORR_SPACING = 25
AUTOCORR_START = 1
AUTOCORR_DENSITY = 0.1


def qft_shots_family() -> ProgressionFamily:
    starts = tuple(68 * i for i in range(1, QFT_SHOTS_N + 1))
    return ProgressionFamily(n=QFT_SHOTS_N, starts=starts, k=QFT_SHOTS_K)


def qft_shots_set(noise_seed: int | None = 0) -> MarkedSet:
    """The Fig-configuration marked set; pass None to skip the noise."""
    clean = from_progressions(qft_shots_family(), QFT_SHOTS_Q)
    if noise_seed is None:
        return clean
    spec = NoiseSpec(kind="target-density", density=QFT_SHOTS_DENSITY, seed=noise_seed)
    return apply_noise(clean, spec)


def autocorr_family() -> ProgressionFamily:
    starts = tuple(
        AUTOCORR_START + AUTOCORR_SPACING * j for j in range(AUTOCORR_N)
    )
    return ProgressionFamily(n=AUTOCORR_N, starts=starts, k=AUTOCORR_K)


def autocorr_set(noise_seed: int | None = 0) -> MarkedSet:
    clean = from_progressions(autocorr_family(), AUTOCORR_Q)
    if noise_seed is None:
        return clean
    spec = NoiseSpec(
        kind="bernoulli-density", density=AUTOCORR_DENSITY, seed=noise_seed
    )
    return apply_noise(clean, spec)
