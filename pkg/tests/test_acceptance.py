"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line
through the capture plugin so plain `pytest` shows them."""

import time
from fractions import Fraction

import numpy as np
import pytest

from helpers import (
    enumerate_magic_3x3,
    naive_dft_probabilities,
    sums_of_two_squares_up_to,
)
from msqkit.detect import (
    Algorithm1Params,
    RecoverParams,
    algorithm1,
    autocorrelation,
    continued_fraction_denominators,
    recover_spacing,
    recover_spacing_from_source,
    top_peaks,
)
from msqkit.errors import AmbiguityError, RecoveryFailure
from msqkit.markedset import MarkedSet, NoiseSpec, apply_noise, from_progressions
from msqkit.numbertheory import (
    certify_absence_squares,
    gap_expression,
    sum_of_two_squares,
)
from msqkit.presets import autocorr_set, qft_shots_family, qft_shots_set
from msqkit.protocol import PartyBSecret, ProtocolParams, run_protocol
from msqkit.qsim import exact_spectrum, hadamard_test, shifted_indicator
from msqkit.squares import (
    MagicSquare,
    ProgressionFamily,
    construct_order_n,
    decompose_3x3,
    magic_constant,
    pattern3x3_generate,
    validate_square,
)

TABLE2_MULTISET = (1, 2, 3, 4, 7, 8, 9, 10, 13, 14, 15, 16, 22, 23, 24, 25)
TABLE3_MULTISET = (1, 3, 5, 7, 13, 15, 17, 19, 25, 27, 29, 31, 37, 39, 41, 43)


def test_criterion_1_exhaustive_3x3_characterization(acceptance_report):
    start = time.time()
    squares = enumerate_magic_3x3(1, 30)
    counterexamples = 0
    for grid in squares:
        square = MagicSquare.from_grid(grid)
        pattern = decompose_3x3(square)
        if pattern3x3_generate(pattern) != square.entry_multiset():
            counterexamples += 1
        elif 3 * grid[1][1] != square.magic_sum:
            counterexamples += 1
    elapsed = time.time() - start
    ok = counterexamples == 0 and len(squares) > 0 and elapsed < 60
    acceptance_report(
        1,
        ok,
        f"{len(squares)} squares in [1,30] decomposed, "
        f"{counterexamples} counterexamples, {elapsed:.1f}s",
    )


def test_criterion_2_construction(acceptance_report):
    start = time.time()
    ok = True
    details = []
    for n in (4, 5, 7, 8, 9):
        starts = tuple((j - 1) * n + 1 for j in range(1, n + 1))
        square = construct_order_n(ProgressionFamily(n=n, starts=starts, k=1))
        good = (
            square.entry_multiset() == tuple(range(1, n * n + 1))
            and square.magic_sum == magic_constant(n)
            and validate_square(square.entries).is_magic
        )
        ok &= good
        details.append(f"n={n}:{'ok' if good else 'BAD'}")
    shifted = construct_order_n(ProgressionFamily(n=4, starts=(1, 7, 13, 22), k=1))
    ok &= shifted.entry_multiset() == TABLE2_MULTISET
    step2 = construct_order_n(ProgressionFamily(n=4, starts=(1, 13, 25, 37), k=2))
    ok &= step2.entry_multiset() == TABLE3_MULTISET
    elapsed = time.time() - start
    ok &= elapsed < 10
    acceptance_report(2, ok, f"{' '.join(details)}, published multisets matched, {elapsed:.1f}s")


def test_criterion_3_qft_engine(acceptance_report):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for q in range(1, 13):
        b = 1 << q
        marks = set(int(x) for x in rng.integers(1, b + 1, size=max(1, b // 3)))
        s = MarkedSet.from_indices(q, marks)
        spec = exact_spectrum(s)
        signs = 1.0 - 2.0 * s.bit_array().astype(float)
        diff = float(np.max(np.abs(spec.probabilities - naive_dft_probabilities(signs))))
        worst = max(worst, diff)
    fft_ok = worst < 1e-10

    parseval_worst = 0.0
    for seed in range(100):
        gen = np.random.default_rng(seed)
        q = int(gen.integers(2, 11))
        b = 1 << q
        marks = set(int(x) for x in gen.integers(1, b + 1, size=b // 2))
        spec = exact_spectrum(MarkedSet.from_indices(q, marks))
        parseval_worst = max(parseval_worst, abs(float(spec.probabilities.sum()) - 1))
    parseval_ok = parseval_worst < 1e-10

    period_ok = True
    for q, period in ((4, 4), (6, 8), (8, 2), (10, 32)):
        b = 1 << q
        s = MarkedSet.from_indices(q, range(period, b + 1, period))
        spec = exact_spectrum(s)
        allowed = set(range(0, b, b // period))
        off_mass = sum(
            p for k, p in enumerate(spec.probabilities) if k not in allowed
        )
        period_ok &= off_mass < 1e-10
    acceptance_report(
        3,
        fft_ok and parseval_ok and period_ok,
        f"fft-vs-naive worst {worst:.2e}, parseval worst {parseval_worst:.2e}, "
        f"period law off-mass clean: {period_ok}",
    )


def test_criterion_4_fig_qft_shots(acceptance_report):
    fam = qft_shots_family()
    exact_hits = 0
    for seed in range(50):
        spec = exact_spectrum(qft_shots_set(noise_seed=seed))
        peaks = top_peaks(spec, 10)
        if any(5 in continued_fraction_denominators(r, 1024, 64) for r in peaks):
            exact_hits += 1
    sampled_hits = 0
    for seed in range(100):
        s = qft_shots_set(noise_seed=seed)
        rep = algorithm1(
            s, 13, Algorithm1Params(shots=40, representatives=fam.starts, seed=seed)
        )
        if rep.outcome == "solution" and rep.family.k == 5:
            sampled_hits += 1
    ok = exact_hits == 50 and sampled_hits >= 50
    acceptance_report(
        4,
        ok,
        f"exact top-10 denominator-5 hits {exact_hits}/50, "
        f"40-shot k=5 recovery {sampled_hits}/100 (needs >= 50)",
    )


def test_criterion_5_autocorrelation_formula(acceptance_report):
    rng = np.random.default_rng(55)
    mismatches = 0
    cases = 0
    for n in range(3, 9):
        for _ in range(3):
            k = int(rng.integers(1, 4))
            d = 2 * (n - 1) * k + int(rng.integers(1, 12))
            l1 = int(rng.integers(1, 6))
            fam = ProgressionFamily(
                n=n, starts=tuple(l1 + j * d for j in range(n)), k=k
            )
            span = max(fam.elements())
            q = max(4, (2 * span + 2).bit_length())  # B large: no truncation
            s = from_progressions(fam, q)
            expected = {}
            for qq in range(-(n - 1), n):
                for mm in range(-(n - 1), n):
                    shift = qq * d + mm * k
                    expected[shift] = max(
                        expected.get(shift, 0), (n - abs(qq)) * (n - abs(mm))
                    )
            top = (n - 1) * d + (n - 1) * k + 2 * k
            for shift in range(0, top + 1):
                cases += 1
                if autocorrelation(s, shift) != expected.get(shift, 0):
                    mismatches += 1
    acceptance_report(5, mismatches == 0, f"{cases} shifts checked exactly, {mismatches} mismatches")


def test_criterion_6_fig_autocorrelation(acceptance_report):
    clean = recover_spacing(
        autocorr_set(noise_seed=None), 2, 6, RecoverParams(shots=0, s_max=128)
    )
    noisy_hits = 0
    for seed in range(50):
        s = autocorr_set(noise_seed=seed)
        try:
            d = recover_spacing(s, 2, 6, RecoverParams(shots=0, s_max=128))
        except RecoveryFailure:
            d = None
        noisy_hits += d == 25
    ok = clean == 25 and noisy_hits >= 45
    acceptance_report(
        6,
        ok,
        f"clean spacing {clean}, noisy recovery {noisy_hits}/50 (needs >= 45)",
    )


def _random_clean_instance(rng):
    n = int(rng.integers(3, 9))
    k = int(rng.integers(1, 4))
    dmin = 2 * (n - 1) * k + 1
    d = int(rng.integers(dmin, 2 * dmin + 10))
    l1 = int(rng.integers(1, 2 * k + 5))
    span = l1 + (n - 1) * d + (n - 1) * k
    q = min(12, max(6, (2 * span + 2).bit_length()))
    fam = ProgressionFamily(n=n, starts=tuple(l1 + j * d for j in range(n)), k=k)
    s = from_progressions(fam, q)
    s_max = min(s.domain_size // 2, 2 * d + (n - 1) * k + k + 2)
    return n, k, d, s, s_max


def test_criterion_7_recovery_guarantee(acceptance_report):
    rng = np.random.default_rng(123)
    clean_hits = 0
    adv_hits = 0
    trials = 200
    for trial in range(trials):
        n, k, d, s, s_max = _random_clean_instance(rng)
        try:
            got = recover_spacing(s, k, n, RecoverParams(shots=0, s_max=s_max))
        except RecoveryFailure:
            got = None
        clean_hits += got == d

        eta = 0.99 * (n - 1) / 2  # strictly below half the one-step drop
        adv_rng = np.random.default_rng(trial)
        perturbation: dict[int, float] = {}

        def source(shift, s=s, eta=eta, adv_rng=adv_rng, perturbation=perturbation):
            shift = abs(shift)
            if shift not in perturbation:
                perturbation[shift] = float(adv_rng.uniform(-eta, eta))
            return autocorrelation(s, shift) + perturbation[shift]

        try:
            got_adv = recover_spacing_from_source(source, k, n, s.domain_size, s_max)
        except (RecoveryFailure, AmbiguityError):
            got_adv = None
        adv_hits += got_adv == d
    ok = clean_hits == trials and adv_hits == trials
    acceptance_report(
        7,
        ok,
        f"clean {clean_hits}/{trials}, perturbed-below-bound {adv_hits}/{trials} "
        f"(both need 100%)",
    )


def test_criterion_8_hadamard_test(acceptance_report):
    rng = np.random.default_rng(88)
    exact_ok = True
    for _ in range(100):
        q = int(rng.integers(3, 11))
        b = 1 << q
        marks = set(int(x) for x in rng.integers(1, b + 1, size=b // 3))
        s = MarkedSet.from_indices(q, marks)
        shift = int(rng.integers(-b + 1, b))
        d = (s.mask ^ shifted_indicator(s, shift).mask).bit_count()
        if hadamard_test(s, shift).exact != pytest.approx(1 - 2 * d / b, abs=1e-12):
            exact_ok = False
    shots = 400
    bound = 3 / np.sqrt(shots)
    within = 0
    trials = 1000
    s = MarkedSet.from_indices(9, range(5, 400, 3))
    for seed in range(trials):
        res = hadamard_test(s, 17, shots=shots, seed=seed)
        within += abs(res.estimate - res.exact) <= bound
    ok = exact_ok and within >= 0.95 * trials
    acceptance_report(
        8,
        ok,
        f"exact identity on 100 pairs: {exact_ok}, "
        f"estimator within 3/sqrt(shots): {within}/{trials} (needs >= 950)",
    )


def test_criterion_9_number_theory(acceptance_report):
    table = sums_of_two_squares_up_to(100_000)
    brute_ok = all(
        sum_of_two_squares(z) == (z in table) for z in range(100_001)
    )

    tails_ok = True
    third = Fraction(1, 3)
    for z in (2, 3, 4):
        for t in range(2, 1_000_001):
            if 2 * t**z < 3 * (t - 1) ** (z - 1):
                tails_ok = False
                break
        if gap_expression(10**6, z) < third:
            tails_ok = False

    planted_ok = True
    planted = 0
    for s_val in range(1, 17):
        for t_val in range(1, 12):
            elems = [s_val**2 + i * t_val**2 for i in range(3)]
            if elems[-1] > 256 or any(e not in table for e in elems):
                continue
            marked = MarkedSet.from_indices(8, elems)
            if certify_absence_squares(marked, 3).verdict != "inconclusive":
                planted_ok = False
            planted += 1
    obstruction_ok = (
        certify_absence_squares(MarkedSet(q=8, mask=0), 3).verdict == "absent"
        and certify_absence_squares(MarkedSet.from_indices(8, [2, 3, 7, 21]), 3).verdict
        == "absent"
        and certify_absence_squares(MarkedSet.from_indices(8, [1, 5]), 3).verdict
        == "absent"
    )
    ok = brute_ok and tails_ok and planted_ok and obstruction_ok
    acceptance_report(
        9,
        ok,
        f"two-squares brute agreement to 1e5: {brute_ok}, gap tails to 1e6: {tails_ok}, "
        f"{planted} planted sets inconclusive: {planted_ok}, obstructions absent: {obstruction_ok}",
    )


def test_criterion_10_protocol(acceptance_report):
    fam = ProgressionFamily(n=13, starts=tuple(68 * i for i in range(1, 14)), k=5)
    clean = from_progressions(fam, 10)
    successes = 0
    for seed in range(20):
        rng = np.random.Generator(np.random.Philox(key=seed))
        bits = tuple(int(b) for b in rng.integers(0, 2, size=64))
        marked = apply_noise(
            clean, NoiseSpec(kind="bernoulli-density", density=0.002, seed=seed)
        )
        secret = PartyBSecret(
            family=fam, marked=marked, representatives=fam.starts, message_bits=bits
        )
        try:
            result = run_protocol(
                secret, params=ProtocolParams(seed=seed, shots_per_round=40)
            )
        except Exception:
            continue
        if result.ok and result.family == fam and result.decoded_bits == bits:
            successes += 1

    marked = apply_noise(
        clean, NoiseSpec(kind="bernoulli-density", density=0.002, seed=3)
    )
    secret = PartyBSecret(
        family=fam, marked=marked, representatives=fam.starts, message_bits=(1, 0) * 32
    )
    params = ProtocolParams(seed=3, shots_per_round=40)
    first = run_protocol(secret, params=params).transcript.to_jsonl()
    second = run_protocol(secret, params=params).transcript.to_jsonl()
    deterministic = first == second
    ok = successes >= 19 and deterministic
    acceptance_report(
        10,
        ok,
        f"end-to-end success {successes}/20 (needs >= 19), "
        f"same-seed transcripts byte-identical: {deterministic}",
    )
