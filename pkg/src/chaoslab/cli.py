"""Command-line interface.

Exit codes: 0 ok, 1 usage or configuration error, 2 numerical or
precondition failure, 3 a statistical acceptance check failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .chaos import DEFAULT_QUAD_ORDER, DEFAULT_TRUNCATION, HermiteExpansion
from .config import ExperimentConfig
from .covariance import CovarianceModel, classify_regime
from .errors import ChaosLabError, ConfigError, UnknownFunction
from .functions import expansion_from_spec
from .partial_sum import build_Y, dyadic_grid, dyadic_pairs, write_wide_csv
from .runner import ExperimentAborted, run_experiment
from .selftest import main_selftest
from .simulate import GaussianPath, simulate_batch
from .stats import (
    DEFAULT_LAG_CUTOFF,
    ben_hariz_sum,
    fdd_covariance_check,
    ks_normality,
    sigma_squared,
    tightness_diagnostic,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_STATISTICAL = 0, 1, 2, 3

log = logging.getLogger("chaoslab")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(p):
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--out", help="output file or directory")
    p.add_argument("--strict", action="store_true", help="fail instead of overriding the normalization")
    p.add_argument("--threads", type=int, default=None, help="worker threads; never changes results")


def _add_function(p):
    p.add_argument("--function", help="registry name, e.g. hermite:2, sign, indicator:0.5")
    p.add_argument("--expansion", help="expansion JSON file (instead of --function)")
    p.add_argument("--Q", type=int, default=None, help=f"truncation level (default {DEFAULT_TRUNCATION})")
    p.add_argument("--quad-order", type=int, default=None, help=f"quadrature order (default {DEFAULT_QUAD_ORDER})")


def _add_covariance(p):
    p.add_argument("--family", choices=["fgn", "exponential", "table", "white"])
    p.add_argument("--H", type=float, help="Hurst index for fgn")
    p.add_argument("--a", type=float, help="decay rate for exponential")
    p.add_argument("--values", help="JSON list rho(0), rho(1), ... for table")
    p.add_argument("--lag-cutoff", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chaoslab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"chaoslab {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("expand", help="Hermite expansion of a function, as JSON")
    _add_common(p)
    _add_function(p)
    p.add_argument("--quadrature", action="store_true", help="use quadrature even when a closed form exists")

    p = sub.add_parser("sigma", help="limiting variance with its truncation error bound")
    _add_common(p)
    _add_function(p)
    _add_covariance(p)

    p = sub.add_parser("criterion", help="partial sums of the Ben Hariz tightness series")
    _add_common(p)
    _add_function(p)
    _add_covariance(p)
    p.add_argument("--R", type=float, default=1.5)

    p = sub.add_parser("regime", help="classify the limit regime")
    _add_common(p)
    _add_covariance(p)
    _add_function(p)
    p.add_argument("--rank", type=int, help="Hermite rank (or give --function)")

    p = sub.add_parser("simulate", help="write Gaussian paths (and optional partial sums) to disk")
    _add_common(p)
    _add_covariance(p)
    _add_function(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--trajectories", action="store_true",
                   help="also write Y_n on the dyadic grid (needs --function)")
    p.add_argument("--wide", action="store_true", help="one wide trajectory CSV instead of one per path")

    for name, help_ in (("verify-fdd", "fdd normality and Brownian covariance"),
                        ("verify-tightness", "L^p increment ratios across the n ladder")):
        p = sub.add_parser(name, help=help_)
        _add_common(p)
        _add_function(p)
        p.add_argument("--paths", help="directory of stored paths from 'simulate' instead of fresh ones")
        p.add_argument("--sigma2", type=float, help="target variance for stored paths (default: computed)")
        p.add_argument("--p", type=float, default=None, help="moment order for tightness")

    p = sub.add_parser("run", help="full experiment from a config")
    _add_common(p)

    p = sub.add_parser("chaos-selftest", help="exact identity suite of the chaos calculus")
    p.add_argument("--cases", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _load_config(args, **overrides) -> ExperimentConfig:
    if not args.config:
        raise UsageError("--config is required")
    doc = json.loads(Path(args.config).read_text())
    if "config" in doc and "config_sha256" in doc:
        doc = doc["config"]  # a manifest
    doc.update({k: v for k, v in overrides.items() if v is not None})
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.out is not None:
        doc["out"] = args.out
    if args.strict:
        doc["strict"] = True
    if args.threads is not None:
        doc["threads"] = args.threads
    return ExperimentConfig.from_dict(doc)


def _config_doc(args) -> dict:
    if getattr(args, "config", None):
        doc = json.loads(Path(args.config).read_text())
        return doc.get("config", doc) if "config_sha256" in doc else doc
    return {}


def _expansion(args) -> HermiteExpansion:
    doc = _config_doc(args)
    Q = args.Q or doc.get("truncation", DEFAULT_TRUNCATION)
    order = args.quad_order or doc.get("quad_order", DEFAULT_QUAD_ORDER)
    if args.expansion:
        return HermiteExpansion.from_json(Path(args.expansion).read_text())
    spec = args.function or doc.get("function")
    if spec is None:
        raise UsageError("give --function, --expansion or a --config with 'function'")
    return expansion_from_spec(spec, Q=Q, quad_order=order,
                               exact=not getattr(args, "quadrature", False))


def _model(args) -> CovarianceModel:
    if args.family is None:
        doc = _config_doc(args)
        if "covariance" not in doc:
            raise UsageError("give --family or a --config with 'covariance'")
        return CovarianceModel.from_dict(doc["covariance"])
    spec = {"family": args.family}
    if args.H is not None:
        spec["H"] = args.H
    if args.a is not None:
        spec["a"] = args.a
    if args.values is not None:
        spec["values"] = json.loads(args.values)
    return CovarianceModel.from_dict(spec)


def _lag_cutoff(args) -> int:
    return args.lag_cutoff or _config_doc(args).get("lag_cutoff", DEFAULT_LAG_CUTOFF)


def cmd_expand(args) -> int:
    e = _expansion(args)
    text = json.dumps(e.to_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    if e.discarded_mass is not None:
        print(f"discarded L2 mass beyond Q={e.truncation}: {e.discarded_mass:.3e}", file=sys.stderr)
    return EXIT_OK


def cmd_sigma(args) -> int:
    e = _expansion(args)
    m = _model(args)
    s = sigma_squared(e, m, lag_cutoff=_lag_cutoff(args))
    print(f"sigma^2 = {s.value:.6f} ± {s.tail_bound:.3g}")
    print(f"(rank {e.rank}, Q = {s.terms_used}, lag cutoff {s.lag_cutoff}, {m.describe()})")
    if e.discarded_mass is not None:
        print(f"discarded L2 mass beyond Q: {e.discarded_mass:.3e}")
    if args.out:
        Path(args.out).write_text(json.dumps(s.__dict__, indent=2) + "\n")
    return EXIT_OK


def cmd_criterion(args) -> int:
    e = _expansion(args)
    m = _model(args)
    b = ben_hariz_sum(e, m, args.R, lag_cutoff=_lag_cutoff(args))
    print(f"{'q':>4} {'term':>14} {'partial':>14}")
    partial = 0.0
    rows = []
    for q, term in zip(b.levels, b.per_term):
        partial += term
        rows.append((int(q), float(term), partial))
        print(f"{int(q):>4} {term:>14.6g} {partial:>14.6g}")
    print(f"sum up to Q = {b.levels[-1]}: {b.partial:.6g}  (R = {args.R})")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("q,term,partial\n")
            for q, term, part in rows:
                fh.write(f"{q},{term!r},{part!r}\n")
    return EXIT_OK


def cmd_regime(args) -> int:
    m = _model(args)
    if args.rank is not None:
        d = args.rank
    elif args.function or args.expansion:
        d = _expansion(args).rank
    else:
        raise UsageError("give --rank or --function")
    print(classify_regime(m, d))
    return EXIT_OK


def cmd_simulate(args) -> int:
    m = _model(args)
    if not args.out:
        raise UsageError("simulate needs --out DIR")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else 0
    paths = simulate_batch(m, args.n, args.replications, seed, threads=args.threads or 1)
    for i, path in enumerate(paths):
        path.dump(out / f"path_{i:05d}")
    if args.trajectories:
        e = _expansion(args)
        grid = dyadic_grid(4)
        ys = [build_Y(p, e, grid) for p in paths]
        if args.wide:
            write_wide_csv(out / "trajectories.csv", grid, np.array([y.values for y in ys]))
        else:
            for i, y in enumerate(ys):
                y.to_csv(out / f"trajectory_{i:05d}.csv")
    print(f"wrote {len(paths)} paths of length {args.n} to {out}")
    return EXIT_OK


def _load_paths(directory) -> list[GaussianPath]:
    stems = sorted(p.with_suffix("") for p in Path(directory).glob("*.json"))
    if not stems:
        raise UsageError(f"no stored paths in {directory}")
    return [GaussianPath.load(s) for s in stems]


def _verify_stored(args, which: str) -> int:
    paths = _load_paths(args.paths)
    e = _expansion(args)
    m = paths[0].model
    grid = dyadic_grid(4)
    ys = [build_Y(p, e, grid) for p in paths]
    V = np.array([y.values for y in ys])
    n = paths[0].n
    if which == "fdd":
        sigma2 = args.sigma2 if args.sigma2 is not None else sigma_squared(e, m).value
        stat, pval = ks_normality(V[:, -1], math.sqrt(sigma2))
        fc = fdd_covariance_check(V, grid, sigma2)
        print(f"KS of Y_n(1)/sigma: D = {stat:.4g}, p = {pval:.4g}")
        print(f"max covariance deviation {fc.max_abs_deviation:.4g} = {fc.max_se_multiple:.2f} SE")
        ok = pval >= 0.01 and fc.max_se_multiple <= 4.0
    else:
        td = tightness_diagnostic(V, args.p or 3.0, dyadic_pairs(4), n=n, times=grid)
        print(f"max ratio {td.max_ratio:.4g} ± {td.max_ratio_se:.2g} at n = {n}")
        ok = True
    return EXIT_OK if ok else EXIT_STATISTICAL


def cmd_verify(args, which: str) -> int:
    if args.paths:
        return _verify_stored(args, which)
    stats = ["variance", "ks", "fdd", "increments"] if which == "fdd" else ["tightness"]
    overrides = {"statistics": stats, "p": args.p}
    if args.function:
        overrides["function"] = args.function
    cfg = _load_config(args, **overrides)
    return _report(run_experiment(cfg))


def _report(report) -> int:
    for v in report.verdicts:
        mark = "PASS" if v.passed else "FAIL"
        print(f"{mark}  {v.criterion:<24} {v.value:.4g} vs {v.threshold:.4g}  {v.detail}")
    print(f"regime: {report.regime.get('regime')}, sigma^2 target: {report.target.get('sigma2')}")
    return EXIT_OK if report.passed else EXIT_STATISTICAL


def cmd_run(args) -> int:
    return _report(run_experiment(_load_config(args)))


def cmd_selftest(args) -> int:
    ok, text = main_selftest(args.cases, args.seed)
    print(text)
    return EXIT_OK if ok else EXIT_STATISTICAL


COMMANDS = {
    "expand": cmd_expand,
    "sigma": cmd_sigma,
    "criterion": cmd_criterion,
    "regime": cmd_regime,
    "simulate": cmd_simulate,
    "verify-fdd": lambda a: cmd_verify(a, "fdd"),
    "verify-tightness": lambda a: cmd_verify(a, "tightness"),
    "run": cmd_run,
    "chaos-selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, UnknownFunction, json.JSONDecodeError, OSError) as exc:
        print(f"chaoslab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ExperimentAborted as exc:
        print(f"chaoslab: {exc}", file=sys.stderr)
        return EXIT_USAGE if isinstance(exc.cause, ConfigError) else EXIT_NUMERICAL
    except ChaosLabError as exc:
        print(f"chaoslab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
