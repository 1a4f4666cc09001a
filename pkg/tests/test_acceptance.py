"""Acceptance gate: each criterion at its stated tolerance.

Monte Carlo criteria share one master seed, fixed before any run and
recorded here.  Results are deterministic for that seed and independent of
the thread count.
"""

import math
import time

import numpy as np

from chaoslab.chaos import HermiteExpansion
from chaoslab.config import ExperimentConfig
from chaoslab.covariance import CovarianceModel
from chaoslab.partial_sum import build_Y, dyadic_grid, dyadic_pairs
from chaoslab.runner import run_experiment
from chaoslab.selftest import run_selftest
from chaoslab.simulate import sample_matrix, toeplitz_covariance
from chaoslab.stats import (
    critical_sigma_squared,
    exact_variance,
    hypercontractivity_check,
    hypercontractivity_single,
    second_moments,
    sigma_squared,
    tightness_diagnostic,
)

MASTER_SEED = 2026

H2_EXP = {"function": "hermite:2", "covariance": {"family": "exponential", "a": 0.5}}


def _run(doc, out=None):
    t0 = time.perf_counter()
    report = run_experiment(ExperimentConfig.from_dict({"seed": MASTER_SEED, **doc}), out=out)
    return report, time.perf_counter() - t0


def test_1_exact_chaos_identities(record):
    t0 = time.perf_counter()
    results = run_selftest(cases=500, seed=MASTER_SEED, tolerance=1e-12)
    elapsed = time.perf_counter() - t0
    worst = max(r.max_error for r in results)
    ok = all(r.passed for r in results) and elapsed < 5.0
    assert record("1", ok, f"4 identities x 500 expansions, max error {worst:.2e} <= 1e-12, {elapsed:.2f}s < 5s")


def test_2_sigma_squared_closed_forms(record):
    t0 = time.perf_counter()
    white = sigma_squared(HermiteExpansion.hermite(1), CovarianceModel.white()).value
    exp_model = CovarianceModel.exponential(0.5)
    h2 = sigma_squared(HermiteExpansion.hermite(2), exp_model, lag_cutoff=200).value
    coeffs = [0.0, 0.8, -0.5, 0.3, 0.2, -0.1]
    total = sigma_squared(HermiteExpansion.from_coeffs(coeffs), exp_model, lag_cutoff=200).value
    parts = []
    for q in range(1, len(coeffs)):
        single = np.zeros(q + 1)
        single[q] = coeffs[q]
        parts.append(sigma_squared(HermiteExpansion.from_coeffs(single), exp_model, lag_cutoff=200).value)
    additivity = abs(total - math.fsum(parts))
    elapsed = time.perf_counter() - t0
    ok = white == 1.0 and abs(h2 - 10 / 3) <= 1e-9 and additivity <= 1e-14 and elapsed < 1.0
    assert record("2", ok, f"white {white}, H_2/exp(0.5) err {abs(h2 - 10 / 3):.1e}, "
                           f"additivity err {additivity:.1e}, {elapsed:.3f}s < 1s")


def test_3_critical_constant(record):
    e2 = abs(critical_sigma_squared(2) - 0.5625)
    e3 = abs(critical_sigma_squared(3) - 1500 / 729)
    assert record("3", e2 <= 1e-14 and e3 <= 1e-14, f"d=2 err {e2:.1e}, d=3 err {e3:.1e}")


def test_4_simulator_law(record):
    t0 = time.perf_counter()
    m = CovarianceModel.fgn(0.75)
    n = 64
    X = sample_matrix(m, n, 100_000, MASTER_SEED)
    cov, se = second_moments(X)
    target = toeplitz_covariance(m, n)
    mult = float(np.max(np.abs(cov - target) / se))
    lag1 = float(np.mean(np.diag(cov, 1)))
    elapsed = time.perf_counter() - t0
    ok = mult <= 4.0 and abs(target[0, 1] - 0.414214) < 1e-6 and elapsed < 120
    assert record("4", ok, f"max |cov - Toeplitz| = {mult:.2f} SE <= 4, mean lag-1 {lag1:.4f} "
                           f"vs 0.414214, {elapsed:.1f}s < 120s")


def test_5_breuer_major_fdd(record):
    report, elapsed = _run({**H2_EXP, "id": "criterion-5", "n_ladder": [2**13], "replications": 2000,
                            "statistics": ["variance", "ks", "increments"]})
    v = report.verdict("variance")
    ks = report.verdict("ks_normal")
    inc = report.verdict("increment_independence")
    ok = v.passed and ks.passed and inc.passed and elapsed < 180
    assert record("5", ok, f"{v.detail} (rel {v.value:.3f}, tolerance 0.07); KS p = {ks.value:.3g} >= 0.01; "
                           f"increments {inc.value:.2f} SE <= 4; seed {MASTER_SEED}; {elapsed:.1f}s")


def test_6_tightness(record, tmp_path):
    report, _ = _run({**H2_EXP, "id": "criterion-6", "n_ladder": [2**8, 2**10, 2**12],
                      "replications": 2000, "p": 3.0, "statistics": ["tightness"]}, out=tmp_path)
    spread = report.verdict("tightness_bounded")

    levels = 4
    grid = dyadic_grid(levels)
    n = 2**10
    X = sample_matrix(CovarianceModel.white(), n, 2000, MASTER_SEED)
    batch = [build_Y(x, HermiteExpansion.hermite(1), grid) for x in X]
    sharp = tightness_diagnostic(batch, 4, dyadic_pairs(levels))
    sharp_ok = abs(sharp.max_ratio - 3**0.25) <= 3 * sharp.max_ratio_se
    ok = spread.passed and sharp_ok
    assert record("6", ok, f"spread {spread.value:.3f} < 0.10 ({spread.detail}); H_1/white p=4 max ratio "
                           f"{sharp.max_ratio:.4f} +/- {sharp.max_ratio_se:.4f} vs 3^(1/4) = {3**0.25:.5f}")


def test_7_critical_regime(record):
    ladder = [2**12, 2**14, 2**16]
    report, elapsed = _run({"function": "hermite:2", "covariance": {"family": "fgn", "H": 0.75},
                            "id": "criterion-7", "n_ladder": ladder, "replications": 1000,
                            "statistics": ["variance"], "tolerances": {"variance_rel": 0.25}})
    v = report.verdict("variance")
    mono = report.verdict("monotone_approach")
    exact = ", ".join(
        f"{exact_variance(HermiteExpansion.hermite(2), CovarianceModel.fgn(0.75), n, 'sqrt_n_log_n'):.4f}"
        for n in ladder
    )
    ok = v.passed and mono.passed and elapsed < 600
    assert record("7", ok, f"{v.detail} (rel {v.value:.3f}, tolerance 0.25); monotone {mono.passed} "
                           f"({mono.detail}); exact finite-n variances {exact}; {elapsed:.1f}s")


def test_8_supercritical_detection(record):
    report, elapsed = _run({"function": "hermite:2", "covariance": {"family": "fgn", "H": 0.9},
                            "id": "criterion-8", "n_ladder": [2**14], "replications": 2000,
                            "statistics": ["ks"]})
    ks = report.verdict("ks_rejects")
    assert report.regime["regime"] == "supercritical"
    assert record("8", ks.passed and elapsed < 180, f"{ks.detail} < 0.01; {elapsed:.1f}s")


def test_9_hypercontractivity(record):
    lhs, rhs = hypercontractivity_single(2, 4)
    analytic = abs(lhs - 60**0.25) <= 1e-12 and abs(rhs - 3 * math.sqrt(2)) <= 1e-12
    single = hypercontractivity_check(2, 4, CovarianceModel.white(), 1, 0.0, 1.0, 20_000,
                                      master_seed=MASTER_SEED)
    summed = hypercontractivity_check(2, 4, CovarianceModel.fgn(0.75), 256, 0.0, 1.0, 2000,
                                      master_seed=MASTER_SEED)
    ok = analytic and single.ok and summed.ok
    assert record("9", ok, f"analytic {lhs:.5f} <= {rhs:.5f}; Monte Carlo single summand "
                           f"{single.lhs:.4f} <= {single.rhs:.4f}, fgn(0.75) n=256 sum "
                           f"{summed.lhs:.4f} <= {summed.rhs:.4f}")


def test_10_determinism_across_threads(record, tmp_path):
    doc = {**H2_EXP, "id": "criterion-10", "n_ladder": [2**8, 2**10, 2**12], "replications": 2000,
           "statistics": ["variance", "ks", "fdd", "increments", "tightness"]}
    blobs = []
    for threads in (1, 4):
        out = tmp_path / f"threads{threads}"
        _run({**doc, "threads": threads}, out=out)
        blobs.append([(out / f).read_bytes() for f in ("summary.csv", "tightness.csv")])
    assert record("10", blobs[0] == blobs[1], "summary.csv and tightness.csv byte-identical "
                                              "for --threads 1 and 4")
