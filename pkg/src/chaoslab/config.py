"""Experiment configuration (a single JSON document).

Schema, with defaults::

    {
      "id": "experiment",
      "function": "hermite:2" | {"coeffs": [...]},
      "truncation": 40,
      "quad_order": 128,
      "covariance": {"family": "fgn", "H": 0.75},
      "n_ladder": [256, 1024, 4096, 16384],
      "replications": 2000,
      "p": 3.0,
      "grid": "dyadic:4" | [0.0, 0.25, ...],
      "normalization": "auto" | "sqrt_n" | "sqrt_n_log_n",
      "interpolate": false,
      "statistics": ["variance", "ks", "fdd", "increments", "tightness"],
      "tolerances": {...},
      "lag_cutoff": 10000,
      "seed": 20240101,
      "strict": false,
      "threads": 1,
      "out": null
    }
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .covariance import CovarianceModel
from .errors import ConfigError
from .partial_sum import NORMALIZATIONS, dyadic_grid
from .stats import MIN_FDD_REPLICATIONS, MIN_KS_SAMPLES, MIN_MOMENT_REPLICATIONS

STATISTICS = ("variance", "ks", "fdd", "increments", "tightness")

DEFAULT_TOLERANCES = {
    # |Var(Y_n(1)) - sigma^2| / sigma^2
    "variance_rel": 0.07,
    # KS significance level; Brownian regimes must not reject
    "ks_alpha": 0.01,
    # max |empirical - target| covariance entry in standard errors
    "fdd_se_multiple": 4.0,
    # |corr of disjoint increments| in standard errors
    "increment_se_multiple": 4.0,
    # (max - min) / min of the tightness ratio across the n ladder
    "tightness_spread": 0.10,
}


@dataclass
class ExperimentConfig:
    function: object = "hermite:2"
    covariance: dict = field(default_factory=lambda: {"family": "exponential", "a": 0.5})
    id: str = "experiment"
    truncation: int = 40
    quad_order: int = 128
    n_ladder: list = field(default_factory=lambda: [2**8, 2**10, 2**12, 2**14])
    replications: int = 2000
    p: float = 3.0
    grid: object = "dyadic:4"
    normalization: str = "auto"
    interpolate: bool = False
    statistics: list = field(default_factory=lambda: list(STATISTICS))
    tolerances: dict = field(default_factory=dict)
    lag_cutoff: int = 10_000
    seed: int = 20240101
    strict: bool = False
    threads: int = 1
    out: str | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return asdict(self)

    def model(self) -> CovarianceModel:
        return CovarianceModel.from_dict(self.covariance)

    def time_grid(self) -> np.ndarray:
        g = self.grid
        if isinstance(g, str):
            head, _, arg = g.partition(":")
            if head != "dyadic":
                raise ConfigError(f"unknown grid spec {g!r}")
            return dyadic_grid(int(arg or 4))
        arr = np.asarray(g, dtype=float)
        if arr.ndim != 1 or len(arr) < 2 or arr[0] != 0.0 or arr[-1] != 1.0:
            raise ConfigError("explicit grid must start at 0 and end at 1")
        if np.any(np.diff(arr) <= 0):
            raise ConfigError("grid must be increasing")
        return arr

    def tol(self, name: str) -> float:
        return float({**DEFAULT_TOLERANCES, **self.tolerances}[name])

    def validate(self) -> None:
        if not self.n_ladder or any(int(n) < 1 for n in self.n_ladder):
            raise ConfigError("n_ladder needs positive integers")
        self.n_ladder = [int(n) for n in self.n_ladder]
        if self.normalization not in ("auto",) + NORMALIZATIONS:
            raise ConfigError(f"unknown normalization {self.normalization!r}")
        if self.normalization == "sqrt_n_log_n" and min(self.n_ladder) < 2:
            raise ConfigError("sqrt(n log n) normalization needs every n >= 2")
        bad = set(self.statistics) - set(STATISTICS)
        if bad:
            raise ConfigError(f"unknown statistics {sorted(bad)}")
        unknown_tol = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown_tol:
            raise ConfigError(f"unknown tolerances {sorted(unknown_tol)}")
        M = int(self.replications)
        if "ks" in self.statistics and M < MIN_KS_SAMPLES:
            raise ConfigError(f"KS needs replications >= {MIN_KS_SAMPLES}")
        if ("fdd" in self.statistics or "increments" in self.statistics) and M < MIN_FDD_REPLICATIONS:
            raise ConfigError(f"fdd checks need replications >= {MIN_FDD_REPLICATIONS}")
        if "tightness" in self.statistics:
            if M < MIN_MOMENT_REPLICATIONS:
                raise ConfigError(f"tightness needs replications >= {MIN_MOMENT_REPLICATIONS}")
            if self.p <= 2:
                raise ConfigError("tightness needs p > 2")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        self.model()
        self.time_grid()

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form, excluding execution-only keys."""
        doc = self.to_dict()
        for key in ("threads", "out"):
            doc.pop(key)
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()
