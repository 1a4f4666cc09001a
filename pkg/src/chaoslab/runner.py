"""Monte Carlo experiments over a ladder of n, with reports and manifests."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .chaos import HermiteExpansion
from .config import ExperimentConfig
from .covariance import RegimeVerdict, classify_regime
from .errors import ChaosLabError, CriticalRankOne, NormalizationMismatch
from .functions import expansion_from_spec
from .partial_sum import build_Y, build_Z, dyadic_pairs, jump_counts
from .simulate import RNG_PROVENANCE, map_replications, simulate, split
from .stats import (
    critical_sigma_squared,
    fdd_covariance_check,
    increment_correlation,
    ks_normality,
    sigma_squared,
    tightness_diagnostic,
)

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = ["n", "estimate", "se", "target", "ratio", "verdict"]
TIGHTNESS_COLUMNS = ["n", "s", "t", "summands", "lp_norm", "se", "ratio"]


class ExperimentAborted(ChaosLabError):
    """A module error raised inside an experiment; ``cause`` is the original."""

    def __init__(self, experiment: str, stage: str, cause: Exception):
        super().__init__(f"experiment {experiment!r} failed during {stage}: {cause}")
        self.cause = cause
        self.stage = stage


@dataclass
class Verdict:
    criterion: str
    tolerance: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""


@dataclass
class ConvergenceReport:
    experiment: str
    regime: dict
    target: dict
    expansion: dict
    rows: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    manifest: dict = field(default_factory=dict)
    status: str = "running"
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.status == "complete" and all(v.passed for v in self.verdicts)

    def verdict(self, name: str) -> Verdict:
        for v in self.verdicts:
            if v.criterion == name:
                return v
        raise KeyError(name)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["passed"] = self.passed
        return doc

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def resolve_normalization(cfg: ExperimentConfig, verdict: RegimeVerdict, model) -> str:
    """The normalization to simulate with, honoring --strict."""
    natural = "sqrt_n_log_n" if verdict.regime == "critical" else "sqrt_n"
    requested = cfg.normalization
    if requested == "auto" or requested == natural:
        return natural
    if requested == "sqrt_n_log_n" and model.family == "fgn" and model.H == 0.5 and verdict.rank == 1:
        raise CriticalRankOne("rank 1 with H = 1/2 is white noise; there is no critical normalization")
    msg = (
        f"normalization {requested} does not match the {verdict.regime} regime "
        f"({verdict.normalization_label})"
    )
    if cfg.strict:
        raise NormalizationMismatch(msg)
    log.warning("%s; using %s", msg, natural)
    return natural


def limit_target(e: HermiteExpansion, model, verdict: RegimeVerdict, cfg: ExperimentConfig) -> dict:
    if verdict.regime == "critical":
        # only the rank-d chaos survives the sqrt(log n) scaling
        c_d = float(e.coeffs[verdict.rank])
        value = c_d * c_d * critical_sigma_squared(verdict.rank)
        return {"sigma2": value, "tail_bound": 0.0, "source": "critical closed form"}
    if verdict.regime == "supercritical":
        return {"sigma2": None, "tail_bound": None, "source": "non-Gaussian limit"}
    s = sigma_squared(e, model, lag_cutoff=cfg.lag_cutoff)
    return {"sigma2": s.value, "tail_bound": s.tail_bound, "source": "chaos series",
            "terms_used": s.terms_used, "lag_cutoff": s.lag_cutoff}


def simulate_values(e, model, n, grid, normalization, replications, seed, threads=1, interpolate=False):
    """(replications, len(grid)) matrix of Y_n (or Z_n) values."""
    builder = build_Z if interpolate else build_Y
    need = n + 1 if interpolate else n

    def one(_, s):
        x = simulate(model, need, s).samples
        return builder(x, e, grid, normalization, n=n).values

    return np.vstack(map_replications(one, seed, replications, threads=threads))


def ladder_seed(master_seed: int, rung: int) -> int:
    """Master seed of the rung-th n in the ladder."""
    return split(master_seed, 1_000_000 + rung)


def _pairs_for(grid, n):
    g = list(np.asarray(grid, dtype=float))
    levels = int(round(math.log2(len(g) - 1))) if len(g) > 1 else 0
    if len(g) - 1 == 2**levels and np.allclose(g, np.arange(len(g)) / (len(g) - 1)):
        pairs = dyadic_pairs(levels)
    else:
        pairs = list(zip(g[:-1], g[1:])) + [(g[0], g[-1])]
    keep = []
    for s, t in pairs:
        ks, kt = jump_counts(n, [s, t])
        if kt > ks:
            keep.append((s, t))
    return keep


def run_experiment(cfg: ExperimentConfig, out: str | Path | None = None) -> ConvergenceReport:
    """Run every enabled statistic over the n ladder and write the outputs.

    Outputs (when ``out`` or ``cfg.out`` is set): ``summary.csv``,
    ``tightness.csv``, ``report.json`` and ``manifest.json``.
    """
    cfg.validate()
    out = Path(out or cfg.out) if (out or cfg.out) else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    manifest = {
        "tool": "chaoslab",
        "version": __version__,
        "numpy": np.__version__,
        "rng": RNG_PROVENANCE,
        "config": cfg.to_dict(),
        "config_sha256": cfg.digest(),
        "master_seed": cfg.seed,
        "ladder_seeds": {str(n): ladder_seed(cfg.seed, i) for i, n in enumerate(cfg.n_ladder)},
        "started": started,
    }
    report = ConvergenceReport(cfg.id, {}, {}, {}, manifest=manifest)
    stage = "setup"
    try:
        model = cfg.model()
        e = expansion_from_spec(cfg.function, Q=cfg.truncation, quad_order=cfg.quad_order)
        report.expansion = {**e.to_dict(), "discarded_mass": e.discarded_mass}
        stage = "regime"
        verdict = classify_regime(model, e.rank)
        normalization = resolve_normalization(cfg, verdict, model)
        report.regime = {
            "regime": verdict.regime,
            "normalization": normalization,
            "hurst": verdict.hurst,
            "rank": verdict.rank,
            "model": model.to_dict(),
        }
        stage = "sigma"
        target = limit_target(e, model, verdict, cfg)
        report.target = target
        stage = "simulation"
        _run_ladder(cfg, e, model, verdict, normalization, target, report, out)
        report.status = "complete"
    except ChaosLabError as exc:
        report.status = "aborted"
        report.error = f"{type(exc).__name__}: {exc}"
        raise ExperimentAborted(cfg.id, stage, exc) from exc
    finally:
        finished = time.time()
        manifest["finished"] = finished
        manifest["wall_clock_seconds"] = finished - started
        if out is not None:
            (out / "report.json").write_text(report.to_json() + "\n")
            (out / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    return report


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row[c]) for c in columns])


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _run_ladder(cfg, e, model, verdict, normalization, target, report, out):
    grid = cfg.time_grid()
    sigma2 = target["sigma2"]
    brownian = sigma2 is not None
    stats = set(cfg.statistics)
    M = cfg.replications
    summary_rows, tight_rows = [], []
    tight_by_n = {}
    var_by_n = {}
    n_final = cfg.n_ladder[-1]
    final = None

    for rung, n in enumerate(cfg.n_ladder):
        V = simulate_values(
            e, model, n, grid, normalization, M, ladder_seed(cfg.seed, rung),
            threads=cfg.threads, interpolate=cfg.interpolate,
        )
        y1 = V[:, -1]
        row = {"n": n}
        sq = y1 * y1
        est = float(np.mean(sq))
        se = float(np.std(sq, ddof=1) / math.sqrt(M))
        var_by_n[n] = (est, se)
        ok = ""
        if brownian:
            ratio = est / sigma2 if sigma2 > 0 else math.nan
            ok = "pass" if abs(ratio - 1.0) <= cfg.tol("variance_rel") else "fail"
        else:
            ratio = math.nan
        summary_rows.append({"n": n, "estimate": est, "se": se,
                             "target": sigma2 if brownian else math.nan,
                             "ratio": ratio, "verdict": ok if "variance" in stats else ""})
        row["variance"] = {"estimate": est, "se": se}

        if "tightness" in stats:
            pairs = _pairs_for(grid, n)
            td = tightness_diagnostic(V, cfg.p, pairs, n=n, times=grid)
            tight_by_n[n] = td.max_ratio
            row["tightness"] = {"max_ratio": td.max_ratio, "max_ratio_se": td.max_ratio_se}
            for r in td.table:
                tight_rows.append({"n": n, **asdict(r)})
        report.rows.append(row)
        if out is not None:
            # flushed per rung so an abort keeps completed rungs
            _write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary_rows)
            if tight_rows:
                _write_csv(out / "tightness.csv", TIGHTNESS_COLUMNS, tight_rows)
        if n == n_final:
            final = V

    _final_verdicts(cfg, e, verdict, sigma2, brownian, stats, grid, final, var_by_n, tight_by_n, report)


def _final_verdicts(cfg, e, verdict, sigma2, brownian, stats, grid, V, var_by_n, tight_by_n, report):
    n = cfg.n_ladder[-1]
    y1 = V[:, -1]
    add = report.verdicts.append
    if "variance" in stats and brownian:
        est, se = var_by_n[n]
        rel = abs(est / sigma2 - 1.0)
        add(Verdict("variance", "variance_rel", rel, cfg.tol("variance_rel"),
                    rel <= cfg.tol("variance_rel"),
                    f"Var(Y_n(1)) = {est:.6g} +/- {se:.2g} vs sigma^2 = {sigma2:.6g} at n={n}"))
        if verdict.regime == "critical" and len(cfg.n_ladder) > 1:
            gaps = [abs(var_by_n[m][0] - sigma2) for m in cfg.n_ladder]
            monotone = all(b < a for a, b in zip(gaps, gaps[1:]))
            add(Verdict("monotone_approach", "variance_rel", float(gaps[-1]), float(gaps[0]), monotone,
                        "|Var - sigma^2| across ladder: " + ", ".join(f"{g:.4g}" for g in gaps)))
    if "ks" in stats:
        alpha = cfg.tol("ks_alpha")
        if verdict.regime in ("summable", "subcritical"):
            stat, pval = ks_normality(y1, math.sqrt(sigma2))
            add(Verdict("ks_normal", "ks_alpha", pval, alpha, pval >= alpha,
                        f"KS of Y_n(1)/sigma: D = {stat:.4g}, p = {pval:.4g}"))
        else:
            sd = float(np.std(y1, ddof=1))
            stat, pval = ks_normality((y1 - y1.mean()) / sd, 1.0)
            if verdict.regime == "critical":
                add(Verdict("ks_normal", "ks_alpha", pval, alpha, pval >= alpha,
                            f"KS of standardized Y_n(1): D = {stat:.4g}, p = {pval:.4g}"))
            else:
                add(Verdict("ks_rejects", "ks_alpha", pval, alpha, pval < alpha,
                            f"KS of standardized Y_n(1): D = {stat:.4g}, p = {pval:.4g}"))
    if "fdd" in stats and brownian:
        fc = fdd_covariance_check(V, grid, sigma2)
        add(Verdict("fdd_covariance", "fdd_se_multiple", fc.max_se_multiple, cfg.tol("fdd_se_multiple"),
                    fc.max_se_multiple <= cfg.tol("fdd_se_multiple"),
                    f"max |cov - sigma^2 min(s,t)| = {fc.max_abs_deviation:.4g}"))
    if "increments" in stats and brownian:
        idx = {float(t): j for j, t in enumerate(grid)}
        mid = float(grid[len(grid) // 2])
        cols = [idx[0.0], idx[mid], idx[mid], idx[1.0]]
        r, se = increment_correlation(V[:, cols], 0.0, mid, mid, 1.0)
        mult = abs(r) / se
        add(Verdict("increment_independence", "increment_se_multiple", mult,
                    cfg.tol("increment_se_multiple"), mult <= cfg.tol("increment_se_multiple"),
                    f"corr(Y({mid})-Y(0), Y(1)-Y({mid})) = {r:.4g} +/- {se:.2g}"))
    if "tightness" in stats and len(tight_by_n) > 1:
        vals = list(tight_by_n.values())
        spread = (max(vals) - min(vals)) / min(vals)
        add(Verdict("tightness_bounded", "tightness_spread", spread, cfg.tol("tightness_spread"),
                    spread <= cfg.tol("tightness_spread"),
                    "max ratio per n: " + ", ".join(f"{k}: {v:.4g}" for k, v in tight_by_n.items())))
