"""Normalized partial-sum processes of phi(X_i).

Y_n(t) = a_n^{-1} sum_{i < floor(nt)} phi(X_i) is the cadlag process and
Z_n adds the fractional term (nt - floor(nt)) phi(X_{floor(nt)}) / a_n so that
the path is piecewise linear.  a_n is sqrt(n) or sqrt(n log n) (natural log).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .chaos import HermiteExpansion, evaluate
from .errors import GridOutOfRange, NonCenteredExpansion, PathTooShort, PreconditionError

NORMALIZATIONS = ("sqrt_n", "sqrt_n_log_n")
GRID_ATOL = 1e-12


@dataclass(frozen=True, eq=False)
class PartialSumPath:
    grid: np.ndarray
    values: np.ndarray
    normalization: str
    n: int
    kind: str  # "cadlag_Y" or "interpolated_Z"

    def at(self, t: float) -> float:
        return float(self.values[_grid_index(self.grid, t)])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "value"])
            for t, v in zip(self.grid, self.values):
                w.writerow([repr(float(t)), repr(float(v))])


def scale(n: int, normalization: str) -> float:
    if normalization == "sqrt_n":
        return math.sqrt(n)
    if normalization == "sqrt_n_log_n":
        if n < 2:
            raise PreconditionError("sqrt(n log n) normalization needs n >= 2")
        return math.sqrt(n * math.log(n))
    raise PreconditionError(f"unknown normalization {normalization!r}")


def jump_counts(n: int, grid) -> np.ndarray:
    """floor(n t) for each grid point.

    The relative nudge keeps t = k/n from rounding down to k-1.
    """
    g = np.asarray(grid, dtype=float)
    return np.floor(n * g * (1.0 + 1e-13)).astype(np.int64)


def _check(e: HermiteExpansion, grid) -> np.ndarray:
    if e.rank < 1 or not e.is_centered:
        raise NonCenteredExpansion(
            "partial sums need a centered expansion of rank >= 1 "
            f"(mean part {e.mean!r}, rank {e.rank})"
        )
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or len(g) == 0:
        raise GridOutOfRange("grid must be a non-empty 1-d sequence")
    if np.any(g < 0.0) or np.any(g > 1.0) or np.any(np.diff(g) <= 0.0):
        raise GridOutOfRange("grid must be increasing within [0, 1]")
    return g


def _samples(path):
    return np.asarray(getattr(path, "samples", path), dtype=float)


def build_Y(path, e: HermiteExpansion, grid, normalization: str = "sqrt_n", n: int | None = None) -> PartialSumPath:
    """Y_n on ``grid``; ``path`` is a GaussianPath or a sample array.

    ``n`` defaults to the path length.
    """
    g = _check(e, grid)
    x = _samples(path)
    n = len(x) if n is None else int(n)
    a_n = scale(n, normalization)
    counts = jump_counts(n, g)
    if counts[-1] > len(x):
        raise PathTooShort(f"need {counts[-1]} samples, path has {len(x)}")
    phi = evaluate(e, x[: counts[-1]])
    prefix = np.concatenate([[0.0], np.cumsum(phi)])
    return PartialSumPath(g, prefix[counts] / a_n, normalization, n, "cadlag_Y")


def build_Z(path, e: HermiteExpansion, grid, normalization: str = "sqrt_n", n: int | None = None) -> PartialSumPath:
    """Piecewise-linear interpolation Z_n on ``grid``.

    X_{floor(nt)} is only required where the fractional weight is nonzero.
    """
    g = _check(e, grid)
    x = _samples(path)
    n = len(x) if n is None else int(n)
    a_n = scale(n, normalization)
    counts = jump_counts(n, g)
    frac = n * g - counts
    frac = np.where(np.abs(frac) < 1e-9, 0.0, frac)
    needed = int(np.max(np.where(frac > 0.0, counts + 1, counts)))
    if needed > len(x):
        raise PathTooShort(f"need {needed} samples, path has {len(x)}")
    phi = evaluate(e, x[:needed])
    prefix = np.concatenate([[0.0], np.cumsum(phi)])
    extra = np.zeros_like(g)
    mask = frac > 0.0
    extra[mask] = frac[mask] * phi[counts[mask]]
    return PartialSumPath(g, (prefix[counts] + extra) / a_n, normalization, n, "interpolated_Z")


def _grid_index(grid, t: float) -> int:
    i = int(np.searchsorted(grid, t - GRID_ATOL))
    if i >= len(grid) or abs(grid[i] - t) > GRID_ATOL:
        raise GridOutOfRange(f"time {t} is not a grid point")
    return i


def increments(p: PartialSumPath, pairs) -> np.ndarray:
    """p(t) - p(s) for each (s, t) pair of grid times with s <= t."""
    out = np.empty(len(pairs))
    for j, (s, t) in enumerate(pairs):
        if s > t:
            raise GridOutOfRange(f"pair ({s}, {t}) has s > t")
        out[j] = p.values[_grid_index(p.grid, t)] - p.values[_grid_index(p.grid, s)]
    return out


def dyadic_grid(levels: int = 4) -> np.ndarray:
    """{k / 2^levels : k = 0..2^levels}."""
    m = 2**levels
    return np.arange(m + 1) / m


def dyadic_pairs(levels: int = 4) -> list[tuple[float, float]]:
    """All dyadic intervals [k/2^l, (k+1)/2^l] for l = 0..levels."""
    pairs = []
    for lev in range(levels + 1):
        m = 2**lev
        pairs.extend((k / m, (k + 1) / m) for k in range(m))
    return pairs


def write_wide_csv(path, grid, matrix) -> None:
    """One row per grid time: t, then one column per replication."""
    path = Path(path)
    matrix = np.asarray(matrix)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"rep{i}" for i in range(matrix.shape[0])])
        for j, t in enumerate(grid):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in matrix[:, j]])
