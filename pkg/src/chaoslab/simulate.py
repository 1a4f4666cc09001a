"""Exact simulation of stationary Gaussian sequences.

Random streams: replication ``i`` of a batch with master seed ``s`` uses the
64-bit seed ``split(s, i)``, derived by numpy's ``SeedSequence`` hashing of
``(s, spawn_key=(i,))``.  Each seed keys an independent Philox4x64
counter-based generator and Gaussian draws use numpy's ziggurat sampler.
Bit-exact reproducibility holds for a fixed numpy build.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.linalg

from .covariance import CovarianceModel
from .errors import NotEmbeddable, PreconditionError, ReplicationError

RNG_PROVENANCE = "philox4x64(seedsequence)/ziggurat"
EIG_RTOL = 1e-9
CHOLESKY_MAX = 2048


def split(master_seed: int, index: int) -> int:
    """Seed of stream ``index`` derived from ``master_seed``."""
    if master_seed < 0 or index < 0:
        raise PreconditionError("seeds and stream indices must be non-negative")
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True, eq=False)
class GaussianPath:
    samples: np.ndarray
    model: CovarianceModel
    seed: int
    method: str
    rng: str = field(default=RNG_PROVENANCE)

    @property
    def n(self) -> int:
        return len(self.samples)

    def sidecar(self) -> dict:
        doc = {"n": self.n, "seed": self.seed, "method": self.method, "rng": self.rng}
        doc.update(self.model.to_dict())
        return doc

    def dump(self, stem) -> tuple[Path, Path]:
        """Write ``<stem>.bin`` (little-endian f64) and ``<stem>.json``."""
        stem = Path(stem)
        bin_path = stem.with_suffix(".bin")
        json_path = stem.with_suffix(".json")
        self.samples.astype("<f8").tofile(bin_path)
        json_path.write_text(json.dumps(self.sidecar(), indent=2) + "\n")
        return bin_path, json_path

    @classmethod
    def load(cls, stem) -> "GaussianPath":
        stem = Path(stem)
        meta = json.loads(stem.with_suffix(".json").read_text())
        samples = np.fromfile(stem.with_suffix(".bin"), dtype="<f8").astype(float)
        if len(samples) != meta["n"]:
            raise PreconditionError(f"{stem}: sidecar says n={meta['n']}, file has {len(samples)}")
        return cls(
            samples,
            CovarianceModel.from_dict(meta),
            int(meta["seed"]),
            meta["method"],
            meta.get("rng", RNG_PROVENANCE),
        )


@lru_cache(maxsize=32)
def circulant_eigenvalues(m: CovarianceModel, n: int) -> np.ndarray | None:
    """Clamped eigenvalues of the minimal circulant embedding, or None.

    None means some eigenvalue is below -EIG_RTOL * max eigenvalue.
    """
    r = np.asarray(m.rho(np.arange(n)), dtype=float)
    row = np.concatenate([r, r[-2:0:-1]])
    lam = np.fft.fft(row).real
    eps = EIG_RTOL * lam.max()
    if lam.min() < -eps:
        return None
    lam = np.where(lam < 0.0, 0.0, lam)
    lam.setflags(write=False)
    return lam


@lru_cache(maxsize=8)
def _toeplitz_cholesky(m: CovarianceModel, n: int) -> np.ndarray | None:
    r = np.asarray(m.rho(np.arange(n)), dtype=float)
    try:
        L = scipy.linalg.cholesky(scipy.linalg.toeplitz(r), lower=True)
    except np.linalg.LinAlgError:
        return None
    L.setflags(write=False)
    return L


def simulate(
    m: CovarianceModel,
    n: int,
    seed: int,
    method: str = "auto",
    cholesky_max: int = CHOLESKY_MAX,
) -> GaussianPath:
    """One realization X_0..X_{n-1} with law N(0, Toeplitz(rho)).

    ``method`` is ``"auto"`` (circulant embedding, Cholesky fallback when the
    embedding has negative eigenvalues and n <= cholesky_max),
    ``"circulant"`` or ``"cholesky"``.
    """
    if n < 1:
        raise PreconditionError("n must be >= 1")
    if method not in ("auto", "circulant", "cholesky"):
        raise PreconditionError(f"unknown method {method!r}")
    rng = make_rng(seed)
    if n == 1:
        return GaussianPath(rng.standard_normal(1), m, seed, "circulant")
    if method != "cholesky":
        lam = circulant_eigenvalues(m, n)
        if lam is not None:
            size = len(lam)
            z = rng.standard_normal(size) + 1j * rng.standard_normal(size)
            x = np.fft.fft(np.sqrt(lam / size) * z).real[:n]
            return GaussianPath(x, m, seed, "circulant")
        if method == "circulant" or n > cholesky_max:
            raise NotEmbeddable(
                f"circulant embedding of {m.describe()} at n={n} has negative eigenvalues"
            )
    L = _toeplitz_cholesky(m, n)
    if L is None:
        raise NotEmbeddable(f"Toeplitz matrix of {m.describe()} at n={n} is not positive definite")
    x = L @ rng.standard_normal(n)
    return GaussianPath(x, m, seed, "cholesky")


def map_replications(func, master_seed: int, replications: int, start: int = 0, threads: int = 1):
    """Apply ``func(index, seed)`` to every replication, in index order.

    Results do not depend on ``threads``: each replication owns its stream.
    """
    if replications < 1:
        raise PreconditionError("replications must be >= 1")
    indices = range(start, start + replications)

    def run(i):
        try:
            return func(i, split(master_seed, i))
        except ReplicationError:
            raise
        except Exception as exc:
            raise ReplicationError(i, exc) from exc

    if threads <= 1:
        return [run(i) for i in indices]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, indices))


def simulate_batch(
    m: CovarianceModel,
    n: int,
    replications: int,
    master_seed: int,
    start: int = 0,
    threads: int = 1,
    **kwargs,
) -> list[GaussianPath]:
    """Replications start..start+replications-1 of ``simulate``."""
    return map_replications(
        lambda i, seed: simulate(m, n, seed, **kwargs),
        master_seed,
        replications,
        start=start,
        threads=threads,
    )


def sample_matrix(m: CovarianceModel, n: int, replications: int, master_seed: int, threads: int = 1) -> np.ndarray:
    """Stack a batch into a (replications, n) array."""
    paths = simulate_batch(m, n, replications, master_seed, threads=threads)
    return np.vstack([p.samples for p in paths])


def toeplitz_covariance(m: CovarianceModel, n: int) -> np.ndarray:
    return scipy.linalg.toeplitz(np.asarray(m.rho(np.arange(n)), dtype=float))


def fgn_embedding_min_ratio(H: float, n: int) -> float:
    """min/max eigenvalue ratio of the unclamped fGn embedding (diagnostic)."""
    r = np.asarray(CovarianceModel.fgn(H).rho(np.arange(n)), dtype=float)
    lam = np.fft.fft(np.concatenate([r, r[-2:0:-1]])).real
    return float(lam.min() / lam.max()) if math.isfinite(lam.max()) else math.nan
