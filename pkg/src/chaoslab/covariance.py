"""Covariance models of stationary Gaussian sequences and regime classification."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    ConditionH1Violated,
    CriticalRankOne,
    DivergentSeries,
    InvalidCovariance,
    PreconditionError,
)

FAMILIES = ("fgn", "exponential", "table", "white")
CRITICAL_ATOL = 1e-12


@dataclass(frozen=True)
class CovarianceModel:
    """Covariance rho(k) = E[X_0 X_k] with rho(0) = 1.

    Use the constructors :meth:`fgn`, :meth:`exponential`, :meth:`table` and
    :meth:`white` rather than calling the class directly.
    """

    family: str
    H: float | None = None
    a: float | None = None
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidCovariance(f"unknown covariance family {self.family!r}")
        if self.family == "fgn":
            if self.H is None or not 0.0 < self.H < 1.0:
                raise InvalidCovariance("fgn needs H in (0, 1)")
        elif self.family == "exponential":
            if self.a is None or not 0.0 < self.a < 1.0:
                raise InvalidCovariance("exponential needs a in (0, 1)")
        elif self.family == "table":
            if not self.values:
                raise InvalidCovariance("table needs at least rho(0)")
            vals = tuple(float(v) for v in self.values)
            object.__setattr__(self, "values", vals)
            if not all(math.isfinite(v) for v in vals):
                raise InvalidCovariance("table values must be finite")
            if abs(vals[0] - 1.0) > 1e-12:
                raise InvalidCovariance(f"table must have rho(0) = 1, got {vals[0]}")
            if any(abs(v) > 1.0 + 1e-12 for v in vals):
                raise InvalidCovariance("table violates |rho(k)| <= 1")

    @classmethod
    def fgn(cls, H: float) -> "CovarianceModel":
        return cls("fgn", H=float(H))

    @classmethod
    def exponential(cls, a: float) -> "CovarianceModel":
        return cls("exponential", a=float(a))

    @classmethod
    def table(cls, values) -> "CovarianceModel":
        return cls("table", values=tuple(float(v) for v in values))

    @classmethod
    def white(cls) -> "CovarianceModel":
        return cls("white")

    def rho(self, k):
        """Covariance at lag(s) ``k``; symmetric in k."""
        k = np.abs(np.asarray(k))
        kf = k.astype(float)
        if self.family == "white":
            out = (k == 0).astype(float)
        elif self.family == "exponential":
            out = self.a**kf
        elif self.family == "fgn":
            h2 = 2.0 * self.H
            out = 0.5 * ((kf + 1.0) ** h2 + np.abs(kf - 1.0) ** h2 - 2.0 * kf**h2)
            out = np.where(k == 0, 1.0, out)
        else:
            vals = np.asarray(self.values)
            idx = np.minimum(k, len(vals) - 1)
            out = np.where(k < len(vals), vals[idx], 0.0)
        return out if np.ndim(out) else float(out)

    def to_dict(self) -> dict:
        if self.family == "fgn":
            return {"family": "fgn", "H": self.H}
        if self.family == "exponential":
            return {"family": "exponential", "a": self.a}
        if self.family == "table":
            return {"family": "table", "values": list(self.values)}
        return {"family": "white"}

    @classmethod
    def from_dict(cls, doc: dict) -> "CovarianceModel":
        fam = doc.get("family")
        try:
            if fam == "fgn":
                return cls.fgn(doc["H"])
            if fam == "exponential":
                return cls.exponential(doc["a"])
            if fam == "table":
                return cls.table(doc["values"])
            if fam in ("white", "white-noise"):
                return cls.white()
        except KeyError as exc:
            raise InvalidCovariance(f"covariance spec {doc!r} is missing {exc}") from None
        raise InvalidCovariance(f"unknown covariance family {fam!r}")

    def describe(self) -> str:
        if self.family == "fgn":
            return f"fgn(H={self.H:g})"
        if self.family == "exponential":
            return f"exponential(a={self.a:g})"
        if self.family == "table":
            return f"table({len(self.values)} lags)"
        return "white-noise"


def rho(m: CovarianceModel, k):
    return m.rho(k)


class PowerSum(NamedTuple):
    value: float
    tail_bound: float


def _fgn_tail(H: float, q: int, K: int) -> float:
    # |rho(k)| <= |H(2H-1)| (k-1)^(2H-2) for k >= 2, from the integral form of
    # the second difference of k^(2H); the tail over k > K >= 1 is compared
    # with sum_{j>=K} j^(-alpha) <= K^(-alpha) + K^(1-alpha)/(alpha-1).
    c = abs(H * (2.0 * H - 1.0))
    if c == 0.0:
        return 0.0
    alpha = q * (2.0 - 2.0 * H)
    if alpha <= 1.0:
        return math.inf
    one_side = c**q * (K ** (-alpha) + K ** (1.0 - alpha) / (alpha - 1.0))
    return 2.0 * one_side


def power_sum(
    m: CovarianceModel,
    q: int,
    lag_cutoff: int,
    absolute: bool = False,
    require_convergence: bool = False,
) -> PowerSum:
    """Truncated sum over |k| <= lag_cutoff of rho(k)^q with a certified tail.

    ``absolute=True`` sums |rho(k)|^q.  ``tail_bound`` overestimates the
    neglected sum of |rho(k)|^q over |k| > lag_cutoff; it is ``inf`` when the
    comparison series diverges, in which case ``require_convergence`` turns
    the result into :class:`DivergentSeries`.
    """
    if q < 1:
        raise PreconditionError("q must be >= 1")
    if lag_cutoff < 1:
        raise PreconditionError("lag_cutoff must be >= 1")
    K = int(lag_cutoff)
    if m.family == "table":
        K_eff = min(K, len(m.values) - 1)
    else:
        K_eff = K
    r = np.asarray(m.rho(np.arange(1, K_eff + 1)), dtype=float)
    terms = np.abs(r) ** q if absolute else r**q
    value = 1.0 + 2.0 * math.fsum(terms)

    if m.family == "white":
        tail = 0.0
    elif m.family == "table":
        rest = np.abs(np.asarray(m.values[K + 1:], dtype=float)) ** q
        tail = 2.0 * math.fsum(rest)
    elif m.family == "exponential":
        aq = m.a**q
        tail = 2.0 * aq ** (K + 1) / (1.0 - aq)
    else:
        tail = _fgn_tail(m.H, q, K)
    if require_convergence and math.isinf(tail):
        raise DivergentSeries(
            f"sum of |rho(k)|^{q} diverges for {m.describe()}"
        )
    return PowerSum(value, tail)


@dataclass(frozen=True)
class RegimeVerdict:
    regime: str
    normalization: str
    hurst: float | None
    rank: int

    @property
    def normalization_label(self) -> str:
        return {
            "sqrt_n": "sqrt(n)",
            "sqrt_n_log_n": "sqrt(n log n)",
        }.get(self.normalization, self.normalization)

    def __str__(self):
        return f"{self.regime}, normalization {self.normalization_label}"


def critical_hurst(d: int) -> float:
    return 1.0 - 1.0 / (2.0 * d)


def classify_regime(m: CovarianceModel, d: int) -> RegimeVerdict:
    """Which limit theorem applies to sum phi(X_i) for rank-d phi.

    fGn with H below 1 - 1/(2d) is subcritical (Brownian limit at rate
    sqrt(n)), at the boundary with d >= 2 it is critical (rate
    sqrt(n log n)), above it supercritical (Hermite-process limit at rate
    n^(1 - d(1-H))).  Other families have summable covariances.
    """
    if d < 1:
        raise PreconditionError("rank must be >= 1")
    if m.family != "fgn":
        return RegimeVerdict("summable", "sqrt_n", None, d)
    H = m.H
    if H == 0.5:
        # white noise: every power of rho is summable
        return RegimeVerdict("summable", "sqrt_n", H, d)
    h_c = critical_hurst(d)
    if abs(H - h_c) < CRITICAL_ATOL:
        if d == 1:
            raise CriticalRankOne("rank 1 at H = 1/2 is white noise, not critical")
        return RegimeVerdict("critical", "sqrt_n_log_n", H, d)
    if H < h_c:
        return RegimeVerdict("subcritical", "sqrt_n", H, d)
    exponent = 1.0 - d * (1.0 - H)
    return RegimeVerdict("supercritical", f"n^{exponent:.6g}", H, d)


def check_h1(m: CovarianceModel, d: int, lag_cutoff: int) -> PowerSum:
    """Absolute power sum at the rank; raises when condition (h1) fails."""
    try:
        return power_sum(m, d, lag_cutoff, absolute=True, require_convergence=True)
    except DivergentSeries as exc:
        raise ConditionH1Violated(str(exc)) from None
