"""Randomized exact-identity suite for the coefficient calculus."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .chaos import (
    HermiteExpansion,
    ShiftedExpansion,
    chaos_bound,
    derivative_norm_sq,
    neg_L_power,
    ou_semigroup,
    shift_down,
    shift_operator,
)


@dataclass
class IdentityCheck:
    name: str
    max_error: float
    tolerance: float
    cases: int

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance


def random_expansion(rng: np.random.Generator, max_rank: int = 6, max_extra: int = 15) -> HermiteExpansion:
    """Centered expansion with a random rank d and nonzero c_d.

    Coefficients are scaled by 1/sqrt(q!) so every chaos level carries
    comparable L^2 mass.
    """
    d = int(rng.integers(1, max_rank + 1))
    Q = d + int(rng.integers(0, max_extra + 1))
    c = np.zeros(Q + 1)
    for q in range(d, Q + 1):
        c[q] = rng.standard_normal() / math.sqrt(math.factorial(q))
    if abs(c[d]) < 1e-3 / math.sqrt(math.factorial(d)):
        c[d] = 1.0 / math.sqrt(math.factorial(d))
    e = HermiteExpansion(c)
    assert e.rank == d
    return e


def run_selftest(cases: int = 500, seed: int = 0, tolerance: float = 1e-12) -> list[IdentityCheck]:
    rng = np.random.default_rng(seed)
    expansions = [random_expansion(rng) for _ in range(cases)]
    errs = {"shift_down^d == shift_operator": 0.0, "P_s P_t == P_(s+t)": 0.0,
            "(-L)(-L)^-1 == Id": 0.0, "|D^k phi_d|^2 <= sum q! c_q^2": 0.0}
    for e in expansions:
        d = e.rank
        scale = max(1.0, float(np.abs(e.coeffs).max()))

        s = ShiftedExpansion.from_expansion(e)
        for _ in range(d):
            s = shift_down(s)
        target = shift_operator(e)
        if s.tensor_power != d or len(s.coeffs) != len(target.coeffs):
            err = math.inf
        else:
            err = float(np.abs(s.coeffs - target.coeffs).max()) / scale
        errs["shift_down^d == shift_operator"] = max(errs["shift_down^d == shift_operator"], err)

        a, b = rng.uniform(0, 3, size=2)
        lhs = ou_semigroup(ou_semigroup(e, a), b).coeffs
        rhs = ou_semigroup(e, a + b).coeffs
        errs["P_s P_t == P_(s+t)"] = max(errs["P_s P_t == P_(s+t)"], float(np.abs(lhs - rhs).max()) / scale)

        back = neg_L_power(neg_L_power(e, -1.0), 1.0).coeffs
        errs["(-L)(-L)^-1 == Id"] = max(errs["(-L)(-L)^-1 == Id"], float(np.abs(back - e.coeffs).max()) / scale)

        bound = chaos_bound(e)
        for k in range(d + 1):
            excess = (derivative_norm_sq(e, k) - bound) / bound
            errs["|D^k phi_d|^2 <= sum q! c_q^2"] = max(errs["|D^k phi_d|^2 <= sum q! c_q^2"], max(excess, 0.0))
    return [IdentityCheck(name, err, tolerance, cases) for name, err in errs.items()]


def format_results(results, elapsed: float | None = None) -> str:
    lines = []
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        lines.append(f"{mark}  {r.name:<34} max error {r.max_error:.3e} (tol {r.tolerance:g}, {r.cases} cases)")
    if elapsed is not None:
        lines.append(f"elapsed {elapsed:.2f} s")
    return "\n".join(lines)


def main_selftest(cases: int = 500, seed: int = 0) -> tuple[bool, str]:
    t0 = time.perf_counter()
    results = run_selftest(cases, seed)
    text = format_results(results, time.perf_counter() - t0)
    return all(r.passed for r in results), text
