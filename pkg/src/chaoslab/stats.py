"""Limit-theory quantities and Monte Carlo verification statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import ndtr

from .chaos import HermiteExpansion, factorial_weighted_squares, gauss_hermite, hermite_eval
from .covariance import CovarianceModel, check_h1, power_sum
from .errors import (
    ConditionH1Violated,
    CriticalRankOne,
    DegenerateSample,
    InsufficientReplications,
    NegativeVariance,
    PreconditionError,
)
from .partial_sum import _grid_index, jump_counts, scale
from .simulate import map_replications, simulate

DEFAULT_LAG_CUTOFF = 10_000
KS_SERIES_TERMS = 100
MIN_KS_SAMPLES = 20
MIN_FDD_REPLICATIONS = 200
MIN_MOMENT_REPLICATIONS = 500


@dataclass(frozen=True)
class SigmaSquared:
    value: float
    tail_bound: float
    terms_used: int
    lag_cutoff: int


def sigma_squared(
    e: HermiteExpansion,
    m: CovarianceModel,
    Q: int | None = None,
    lag_cutoff: int = DEFAULT_LAG_CUTOFF,
) -> SigmaSquared:
    """Limiting variance sum_{q=d}^Q q! c_q^2 sum_k rho(k)^q with error bar.

    The tail bound adds the lag tails of every level and the chaos mass
    beyond Q (coefficients above Q plus the expansion's discarded mass)
    times sum_k |rho(k)|^d, which dominates every higher power.
    """
    d = e.rank
    if d < 1:
        raise PreconditionError("sigma^2 needs an expansion of rank >= 1")
    Q = e.truncation if Q is None else min(int(Q), e.truncation)
    h1 = check_h1(m, d, lag_cutoff)
    weights = factorial_weighted_squares(e.coeffs)
    terms, tails = [], []
    for q in range(d, Q + 1):
        w = weights[q]
        if w == 0.0:
            continue
        ps = power_sum(m, q, lag_cutoff)
        terms.append(w * ps.value)
        tails.append(w * ps.tail_bound)
    chaos_tail = math.fsum(weights[Q + 1:]) + (e.discarded_mass or 0.0)
    tails.append(chaos_tail * (h1.value + h1.tail_bound))
    value = math.fsum(terms)
    tail = math.fsum(tails)
    if value < -tail - 1e-12 * max(1.0, abs(value)):
        raise NegativeVariance(f"sigma^2 = {value} is negative beyond its error bar {tail}")
    return SigmaSquared(value, tail, Q, int(lag_cutoff))


def critical_sigma_squared(d: int) -> float:
    """2 d! ((2d-1)(d-1)/(2d^2))^d, the critical fGn variance for phi = H_d."""
    if d == 1:
        raise CriticalRankOne("the critical constant vanishes at d = 1 (white noise)")
    if d < 1:
        raise PreconditionError("d must be >= 2")
    base = Fraction((2 * d - 1) * (d - 1), 2 * d * d)
    return float(2 * math.factorial(d) * base**d)


def exact_variance(e: HermiteExpansion, m: CovarianceModel, n: int, normalization: str = "sqrt_n") -> float:
    """Var of a_n^{-1} sum_{i<n} phi(X_i) at finite n.

    Uses E[H_p(X_0) H_q(X_k)] = q! rho(k)^q delta_pq.
    """
    k = np.arange(1, n, dtype=float)
    r = np.asarray(m.rho(np.arange(1, n)), dtype=float)
    weights = factorial_weighted_squares(e.coeffs)
    total = 0.0
    for q in range(1, len(weights)):
        if weights[q] == 0.0:
            continue
        total += weights[q] * (n + 2.0 * math.fsum((n - k) * r**q))
    return total / scale(n, normalization) ** 2


@dataclass(frozen=True)
class BenHariz:
    partial: float
    per_term: np.ndarray
    levels: np.ndarray


def ben_hariz_sum(
    e: HermiteExpansion,
    m: CovarianceModel,
    R: float,
    Q: int | None = None,
    lag_cutoff: int = DEFAULT_LAG_CUTOFF,
) -> BenHariz:
    """Partial sums of sqrt(q!) |c_q| (sum_k |rho(k)|^q)^{1/2} R^q, q = d..Q."""
    if R <= 1.0:
        raise PreconditionError("R must be > 1")
    d = e.rank
    if d < 1:
        raise PreconditionError("criterion needs an expansion of rank >= 1")
    Q = e.truncation if Q is None else min(int(Q), e.truncation)
    check_h1(m, d, lag_cutoff)
    levels = np.arange(d, Q + 1)
    weights = factorial_weighted_squares(e.coeffs)
    per_term = np.empty(len(levels))
    for i, q in enumerate(levels):
        if weights[q] == 0.0:
            per_term[i] = 0.0
            continue
        ps = power_sum(m, int(q), lag_cutoff, absolute=True)
        if math.isinf(ps.tail_bound):
            raise ConditionH1Violated(f"sum |rho|^{q} diverges")
        per_term[i] = math.sqrt(weights[q]) * math.sqrt(ps.value) * R ** float(q)
    return BenHariz(math.fsum(per_term), per_term, levels)


def kolmogorov_sf(x: float, terms: int = KS_SERIES_TERMS) -> float:
    """Asymptotic Kolmogorov tail P(sup|B| > x) for the Brownian bridge B.

    The alternating series 2 sum (-1)^(k-1) exp(-2 k^2 x^2) is used for
    x >= 1; below, the theta-transformed series for the CDF converges faster.
    """
    if x <= 0.0:
        return 1.0
    if x >= 1.0:
        s = math.fsum(
            (-1.0) ** (k - 1) * math.exp(-2.0 * k * k * x * x) for k in range(1, terms + 1)
        )
        return min(1.0, max(0.0, 2.0 * s))
    c = math.pi**2 / (8.0 * x * x)
    cdf = math.sqrt(2.0 * math.pi) / x * math.fsum(
        math.exp(-((2 * k - 1) ** 2) * c) for k in range(1, terms + 1)
    )
    return min(1.0, max(0.0, 1.0 - cdf))


def ks_normality(samples, sigma: float = 1.0) -> tuple[float, float]:
    """Two-sided KS statistic of samples/sigma against N(0,1), asymptotic p-value."""
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or len(x) < MIN_KS_SAMPLES:
        raise PreconditionError(f"KS test needs at least {MIN_KS_SAMPLES} samples")
    if sigma <= 0.0:
        raise PreconditionError("sigma must be > 0")
    if np.all(x == x[0]):
        raise DegenerateSample("all samples are equal")
    M = len(x)
    cdf = ndtr(np.sort(x) / sigma)
    i = np.arange(1, M + 1)
    stat = float(max(np.max(i / M - cdf), np.max(cdf - (i - 1) / M)))
    return stat, kolmogorov_sf(math.sqrt(M) * stat)


def _values_matrix(batch, times) -> np.ndarray:
    """(replications, len(times)) values from PartialSumPaths or an array."""
    if isinstance(batch, np.ndarray):
        return np.asarray(batch, dtype=float)
    return np.array([[p.at(t) for t in times] for p in batch], dtype=float)


@dataclass
class FddCheck:
    times: np.ndarray
    covariance: np.ndarray
    target: np.ndarray
    standard_errors: np.ndarray
    max_abs_deviation: float
    max_se_multiple: float
    replications: int

    def to_dict(self) -> dict:
        return {
            "times": self.times.tolist(),
            "covariance": self.covariance.tolist(),
            "target": self.target.tolist(),
            "standard_errors": self.standard_errors.tolist(),
            "max_abs_deviation": self.max_abs_deviation,
            "max_se_multiple": self.max_se_multiple,
            "replications": self.replications,
        }


def second_moments(V, chunk: int = 1024) -> tuple[np.ndarray, np.ndarray]:
    """Raw second moments E[V_i V_j] of the columns and their standard errors.

    Accumulates over row chunks so memory stays O(chunk * k^2).
    """
    V = np.asarray(V, dtype=float)
    M, k = V.shape
    s1 = np.zeros((k, k))
    s2 = np.zeros((k, k))
    for lo in range(0, M, chunk):
        block = V[lo:lo + chunk]
        prods = block[:, :, None] * block[:, None, :]
        s1 += prods.sum(axis=0)
        s2 += (prods * prods).sum(axis=0)
    mean = s1 / M
    var = np.maximum(s2 / M - mean * mean, 0.0) * M / (M - 1)
    return mean, np.sqrt(var / M)


def fdd_covariance_check(batch, times, sigma2: float, target=None) -> FddCheck:
    """Compare E[Y(t_i) Y(t_j)] with sigma2 * min(t_i, t_j).

    ``batch`` is a list of PartialSumPath or a (replications, k) array of
    values at ``times``.  ``target`` overrides the Brownian covariance (for
    instance with an exact finite-n matrix).  Each entry's standard error is
    the sample standard deviation of Y(t_i) Y(t_j) over sqrt(M).
    """
    times = np.asarray(times, dtype=float)
    V = _values_matrix(batch, times)
    M = V.shape[0]
    if M < MIN_FDD_REPLICATIONS:
        raise InsufficientReplications(f"need >= {MIN_FDD_REPLICATIONS} replications, got {M}")
    cov, se = second_moments(V)
    if target is None:
        target = sigma2 * np.minimum.outer(times, times)
    target = np.asarray(target, dtype=float)
    dev = np.abs(cov - target)
    with np.errstate(divide="ignore", invalid="ignore"):
        mult = np.where(se > 0, dev / se, np.where(dev > 0, np.inf, 0.0))
    return FddCheck(times, cov, target, se, float(dev.max()), float(mult.max()), M)


def brownian_target(n: int, times, sigma2: float = 1.0) -> np.ndarray:
    """Exact covariance floor(n t_i ^ n t_j)/n of an i.i.d. unit-variance sum."""
    k = jump_counts(n, times)
    return sigma2 * np.minimum.outer(k, k) / n


def increment_correlation(batch, t1, t2, t3, t4) -> tuple[float, float]:
    """corr(Y(t2)-Y(t1), Y(t4)-Y(t3)) and its standard error ~ 1/sqrt(M)."""
    times = [t1, t2, t3, t4]
    if isinstance(batch, np.ndarray):
        V = batch
    else:
        V = _values_matrix(batch, times)
    a = V[:, 1] - V[:, 0]
    b = V[:, 3] - V[:, 2]
    M = len(a)
    r = float(np.corrcoef(a, b)[0, 1])
    return r, (1.0 - r * r) / math.sqrt(M - 1)


def lp_norm(x, p: float) -> tuple[float, float]:
    """Empirical (mean |x|^p)^{1/p} and its delta-method standard error."""
    a = np.abs(np.asarray(x, dtype=float)) ** p
    M = len(a)
    mp = float(a.mean())
    if mp == 0.0:
        return 0.0, 0.0
    se_mp = float(a.std(ddof=1)) / math.sqrt(M)
    norm = mp ** (1.0 / p)
    return norm, norm * se_mp / (p * mp)


@dataclass
class TightnessRow:
    s: float
    t: float
    summands: int
    lp_norm: float
    se: float
    ratio: float
    ratio_se: float


@dataclass
class Tightness:
    max_ratio: float
    max_ratio_se: float
    table: list[TightnessRow] = field(default_factory=list)


def tightness_diagnostic(batch, p: float, pairs, n: int | None = None, times=None) -> Tightness:
    """max over pairs of ||Y(t)-Y(s)||_p / ((floor(nt)-floor(ns))/n)^{1/2}.

    ``batch`` is a list of PartialSumPath, or a (replications, k) array of
    values at ``times`` together with ``n``.
    """
    if p <= 2.0:
        raise PreconditionError("tightness diagnostic needs p > 2")
    if isinstance(batch, np.ndarray):
        if n is None or times is None:
            raise PreconditionError("array input needs n and times")
        V = batch
        grid = np.asarray(times, dtype=float)
    else:
        n = batch[0].n
        grid = batch[0].grid
        V = np.array([p_.values for p_ in batch])
    M = V.shape[0]
    if M < MIN_MOMENT_REPLICATIONS:
        raise InsufficientReplications(f"need >= {MIN_MOMENT_REPLICATIONS} replications, got {M}")
    rows = []
    for s, t in pairs:
        ks, kt = jump_counts(n, [s, t])
        if kt <= ks:
            raise PreconditionError(f"pair ({s}, {t}) has no summands at n={n}")
        i = _grid_index(grid, s)
        j = _grid_index(grid, t)
        norm, se = lp_norm(V[:, j] - V[:, i], p)
        h = math.sqrt((kt - ks) / n)
        rows.append(TightnessRow(float(s), float(t), int(kt - ks), norm, se, norm / h, se / h))
    best = max(rows, key=lambda r: r.ratio)
    return Tightness(best.ratio, best.ratio_se, rows)


def chaos_lp_norm(q: int, p: float, quad_order: int = 128) -> float:
    """||H_q(N)||_p by Gauss-Hermite quadrature (exact for even integer p)."""
    x, w = gauss_hermite(quad_order)
    return float(np.dot(w, np.abs(hermite_eval(q, x)) ** p)) ** (1.0 / p)


def hypercontractivity_single(q: int, p: float) -> tuple[float, float]:
    """(||H_q(N)||_p, (p-1)^{q/2} ||H_q(N)||_2) for one summand."""
    return chaos_lp_norm(q, p), (p - 1.0) ** (q / 2.0) * math.sqrt(math.factorial(q))


@dataclass(frozen=True)
class Hypercontractivity:
    lhs: float
    rhs: float
    ok: bool
    lhs_se: float
    l2: float


def hypercontractivity_check(
    q: int,
    p: float,
    m: CovarianceModel,
    n: int,
    s: float,
    t: float,
    replications: int,
    master_seed: int = 0,
    threads: int = 1,
) -> Hypercontractivity:
    """Empirical check of ||S||_p <= (p-1)^{q/2} ||S||_2 for the chaos sum
    S = n^{-1/2} sum_{floor(ns) <= i < floor(nt)} H_q(X_i)."""
    if q < 1:
        raise PreconditionError("q must be >= 1")
    if p <= 2.0:
        raise PreconditionError("p must be > 2")
    if replications < MIN_MOMENT_REPLICATIONS:
        raise InsufficientReplications(f"need >= {MIN_MOMENT_REPLICATIONS} replications")
    ks, kt = jump_counts(n, [s, t])
    if kt <= ks:
        raise PreconditionError("empty summation range")

    def one(_, seed):
        x = simulate(m, max(int(kt), 1), seed).samples
        return float(np.sum(hermite_eval(q, x[ks:kt]))) / math.sqrt(n)

    S = np.array(map_replications(one, master_seed, replications, threads=threads))
    lhs, lhs_se = lp_norm(S, p)
    l2 = float(np.sqrt(np.mean(S * S)))
    rhs = (p - 1.0) ** (q / 2.0) * l2
    slack = 4.0 * lhs_se / lhs if lhs > 0 else 0.0
    return Hypercontractivity(lhs, rhs, lhs <= rhs * (1.0 + slack), lhs_se, l2)
