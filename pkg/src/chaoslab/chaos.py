"""Hermite polynomials and coefficient-level Wiener chaos calculus.

A square-integrable function of one standard Gaussian variable is represented
by its coefficients in the basis of Hermite polynomials with leading
coefficient 1,

    f(x) = sum_q c_q H_q(x),    E[H_p(N) H_q(N)] = q! delta_pq.

The Malliavin operators used in the functional Breuer-Major argument act
diagonally (or by index shifts) on these coefficients, so they are exact
array manipulations here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import (
    NegativeTime,
    NonFiniteQuadrature,
    NonzeroConstant,
    PreconditionError,
    RankNotFound,
    ZeroRank,
)

DEFAULT_TRUNCATION = 40
DEFAULT_QUAD_ORDER = 128
RANK_RTOL = 1e-10
# above this level q! c_q^2 is accumulated in log space
LOG_FACTORIAL_LEVEL = 30


def rank_tolerance(coeffs) -> float:
    """Absolute threshold below which a coefficient counts as zero."""
    return RANK_RTOL * max(1.0, float(np.sum(np.abs(coeffs))))


def _find_rank(coeffs) -> int:
    tol = rank_tolerance(coeffs)
    for q in range(1, len(coeffs)):
        if abs(coeffs[q]) > tol:
            return q
    return 0


def factorial_weighted_squares(coeffs, start: int = 0) -> np.ndarray:
    """Return the terms q! c_q^2 for q = start..len(coeffs)-1."""
    out = np.empty(max(len(coeffs) - start, 0))
    for i, q in enumerate(range(start, len(coeffs))):
        c = float(coeffs[q])
        if c == 0.0:
            out[i] = 0.0
        elif q <= LOG_FACTORIAL_LEVEL:
            out[i] = math.factorial(q) * c * c
        else:
            out[i] = math.exp(math.lgamma(q + 1) + 2.0 * math.log(abs(c)))
    return out


@dataclass(frozen=True, eq=False)
class HermiteExpansion:
    """Finite Hermite expansion c_0..c_Q of a function of one Gaussian.

    ``coeffs[0]`` is the mean part E[f(N)].  ``rank`` is the smallest q >= 1
    whose coefficient exceeds :func:`rank_tolerance` (0 when the expansion is
    constant).  ``discarded_mass`` is the estimated L^2 mass beyond the
    truncation when the expansion came from quadrature of a function.
    """

    coeffs: np.ndarray
    rank: int = field(default=-1)
    discarded_mass: float | None = None

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 1 or len(c) == 0:
            raise PreconditionError("coefficients must be a non-empty 1-d sequence")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        if self.rank < 0:
            object.__setattr__(self, "rank", _find_rank(c))

    @classmethod
    def from_coeffs(cls, coeffs, discarded_mass=None) -> "HermiteExpansion":
        return cls(np.asarray(coeffs, dtype=float), discarded_mass=discarded_mass)

    @classmethod
    def hermite(cls, q: int, scale: float = 1.0) -> "HermiteExpansion":
        c = np.zeros(q + 1)
        c[q] = scale
        return cls(c)

    @property
    def mean(self) -> float:
        return float(self.coeffs[0])

    @property
    def truncation(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_centered(self) -> bool:
        return abs(self.coeffs[0]) <= rank_tolerance(self.coeffs)

    def l2_norm_sq(self) -> float:
        """Variance of f(N): sum over q >= 1 of q! c_q^2."""
        return math.fsum(factorial_weighted_squares(self.coeffs, 1))

    def __call__(self, x):
        return evaluate(self, x)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "coeffs": [float(c) for c in self.coeffs],
            "rank": int(self.rank),
            "truncation": int(self.truncation),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc: dict) -> "HermiteExpansion":
        try:
            coeffs = [float(c) for c in doc["coeffs"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise PreconditionError(f"malformed expansion document: {exc}") from None
        if "mean" in doc and abs(float(doc["mean"]) - coeffs[0]) > 1e-12 * max(1.0, abs(coeffs[0])):
            raise PreconditionError("'mean' disagrees with coeffs[0]")
        trunc = int(doc.get("truncation", len(coeffs) - 1))
        if trunc < len(coeffs) - 1:
            coeffs = coeffs[: trunc + 1]
        elif trunc > len(coeffs) - 1:
            coeffs = coeffs + [0.0] * (trunc + 1 - len(coeffs))
        out = cls.from_coeffs(coeffs)
        if "rank" in doc and int(doc["rank"]) != out.rank:
            raise PreconditionError(
                f"declared rank {doc['rank']} but coefficients have rank {out.rank}"
            )
        return out

    @classmethod
    def from_json(cls, text: str) -> "HermiteExpansion":
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        nz = {q: round(float(c), 12) for q, c in enumerate(self.coeffs) if c != 0.0}
        return f"HermiteExpansion(rank={self.rank}, Q={self.truncation}, coeffs={nz})"


@dataclass(frozen=True, eq=False)
class ShiftedExpansion:
    """Coefficient sequence paired with the power r of the factor h^{(x) r}."""

    coeffs: np.ndarray
    tensor_power: int = 0

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_expansion(cls, e: HermiteExpansion) -> "ShiftedExpansion":
        return cls(e.coeffs, 0)


def hermite_eval(q: int, x):
    """H_q(x) by the three-term recurrence; ``x`` may be an array."""
    if q < 0:
        raise PreconditionError("q must be >= 0")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if q == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = x.copy()
    for k in range(1, q):
        h_prev, h = h, x * h - k * h_prev
    return h if h.ndim else float(h)


def hermite_table(Q: int, x) -> np.ndarray:
    """Array of shape (Q+1, *x.shape) with H_0(x)..H_Q(x)."""
    x = np.asarray(x, dtype=float)
    out = np.empty((Q + 1,) + x.shape)
    out[0] = 1.0
    if Q >= 1:
        out[1] = x
    for k in range(1, Q):
        out[k + 1] = x * out[k] - k * out[k - 1]
    return out


def evaluate(e: HermiteExpansion, x):
    """Evaluate sum_q c_q H_q(x) in one backward (Clenshaw) pass."""
    x = np.asarray(x, dtype=float)
    c = e.coeffs
    b1 = np.zeros_like(x)
    b2 = np.zeros_like(x)
    for k in range(len(c) - 1, -1, -1):
        b1, b2 = c[k] + x * b1 - (k + 1) * b2, b1
    return b1 if b1.ndim else float(b1)


@lru_cache(maxsize=16)
def gauss_hermite(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights integrating against the standard Gaussian density."""
    with np.errstate(all="ignore"):
        x, w = np.polynomial.hermite_e.hermegauss(order)
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(x))):
        raise NonFiniteQuadrature(f"Gauss-Hermite rule of order {order} overflowed")
    w = w / math.sqrt(2.0 * math.pi)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gaussian_expectation(f: Callable, quad_order: int = DEFAULT_QUAD_ORDER) -> float:
    x, w = gauss_hermite(quad_order)
    return float(np.dot(w, f(x)))


def expand(
    f: Callable,
    Q: int = DEFAULT_TRUNCATION,
    quad_order: int = DEFAULT_QUAD_ORDER,
) -> HermiteExpansion:
    """Hermite coefficients c_q = E[f(N) H_q(N)] / q! for q = 0..Q.

    ``f`` must accept a numpy array.  Raises :class:`NonFiniteQuadrature` when
    ``f`` is not finite at some node and :class:`RankNotFound` when every
    coefficient c_1..c_Q vanishes.
    """
    if Q < 1:
        raise PreconditionError("Q must be >= 1")
    if quad_order < Q + 1:
        raise PreconditionError("quad_order must be >= Q + 1")
    x, w = gauss_hermite(quad_order)
    fx = np.asarray(f(x), dtype=float)
    if fx.shape != x.shape:
        fx = np.broadcast_to(fx, x.shape).astype(float)
    if not np.all(np.isfinite(fx)):
        raise NonFiniteQuadrature("function is not finite at some quadrature node")
    wf = w * fx
    H = hermite_table(Q, x)
    raw = H @ wf
    coeffs = np.empty(Q + 1)
    for q in range(Q + 1):
        if q <= LOG_FACTORIAL_LEVEL:
            coeffs[q] = raw[q] / math.factorial(q)
        else:
            coeffs[q] = raw[q] * math.exp(-math.lgamma(q + 1))
    e = HermiteExpansion(coeffs)
    if e.rank == 0:
        raise RankNotFound(f"all coefficients c_1..c_{Q} are below tolerance")
    variance = float(np.dot(wf, fx)) - coeffs[0] ** 2
    discarded = max(0.0, variance - e.l2_norm_sq())
    return HermiteExpansion(coeffs, rank=e.rank, discarded_mass=discarded)


def shift_operator(e: HermiteExpansion) -> HermiteExpansion:
    """phi_d: shift the coefficients down by the rank d."""
    d = e.rank
    if d == 0:
        raise ZeroRank("shift operator needs rank >= 1")
    if not e.is_centered:
        raise NonzeroConstant("shift operator needs a zero mean part")
    return HermiteExpansion(e.coeffs[d:].copy())


def derivative(s: ShiftedExpansion) -> ShiftedExpansion:
    """Malliavin derivative D on F = sum c_q H_q(W(h)), with |h| = 1.

    D H_q(W(h)) = q H_{q-1}(W(h)) h, so level q-1 receives q c_q and the
    tensor power grows by one.
    """
    c = s.coeffs
    if len(c) <= 1:
        return ShiftedExpansion(np.zeros(1), s.tensor_power + 1)
    q = np.arange(1, len(c), dtype=float)
    return ShiftedExpansion(q * c[1:], s.tensor_power + 1)


def shift_down(s: ShiftedExpansion) -> ShiftedExpansion:
    """Apply D (-L)^{-1}: level q moves to q-1 with the coefficient unchanged."""
    tol = rank_tolerance(s.coeffs)
    if abs(s.coeffs[0]) > tol:
        raise NonzeroConstant(
            f"level-0 coefficient {s.coeffs[0]!r} exceeds tolerance {tol:.3g}"
        )
    inv = neg_L_power(HermiteExpansion(s.coeffs, rank=0), -1.0, centered_check=False)
    return derivative(ShiftedExpansion(inv.coeffs, s.tensor_power))


def ou_semigroup(e: HermiteExpansion, t: float) -> HermiteExpansion:
    """Ornstein-Uhlenbeck semigroup P_t: c_q -> exp(-q t) c_q."""
    if t < 0:
        raise NegativeTime(f"t must be >= 0, got {t}")
    q = np.arange(len(e.coeffs), dtype=float)
    with np.errstate(invalid="ignore"):
        factor = np.exp(-q * t)
    factor[0] = 1.0
    return HermiteExpansion(e.coeffs * factor)


def neg_L_power(e: HermiteExpansion, r: float, centered_check: bool = True) -> HermiteExpansion:
    """(-L)^r: c_q -> q^r c_q for q >= 1.

    The mean part is kept for r = 0 and annihilated for r > 0.  Negative
    powers require a centered expansion.
    """
    c = e.coeffs
    if r == 0:
        return HermiteExpansion(c.copy())
    if r < 0 and centered_check and abs(c[0]) > rank_tolerance(c):
        raise NonzeroConstant("(-L)^r with r < 0 needs a zero mean part")
    out = np.zeros_like(c)
    q = np.arange(1, len(c), dtype=float)
    out[1:] = c[1:] * q**r
    return HermiteExpansion(out)


def _falling(n: int, k: int) -> int:
    out = 1
    for j in range(k):
        out *= n - j
    return out


def derivative_norm_sq(e: HermiteExpansion, k: int) -> float:
    """E|D^k phi_d(W(h))|^2 = sum_{q>=d} c_q^2 [(q-d)_k]^2 (q-d-k)!.

    ``e`` is the original expansion with rank d; (m)_k is the falling
    factorial.
    """
    if k < 0:
        raise PreconditionError("k must be >= 0")
    d = e.rank
    terms = []
    for q in range(d, len(e.coeffs)):
        m = q - d - k
        if m < 0:
            continue
        c = float(e.coeffs[q])
        if c == 0.0:
            continue
        log_term = 2.0 * math.log(abs(c)) + 2.0 * math.log(_falling(q - d, k)) + math.lgamma(m + 1)
        terms.append(math.exp(log_term))
    return math.fsum(terms)


def chaos_bound(e: HermiteExpansion) -> float:
    """sum_{q>=d} c_q^2 q!, the upper bound for every derivative norm with k <= d."""
    return math.fsum(factorial_weighted_squares(e.coeffs, e.rank))
