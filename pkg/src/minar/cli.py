"""Command line front end: simulate, fit, moments, compare, study.

Exit codes: 0 success, 1 model or numerical failure, 2 I/O or configuration failure.
"""
import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import baselines
from .em import FitConfig, fit, information_criteria
from .exceptions import ConfigError, DataError, MinarError
from .io import dump_json, format_csv, load_csv, load_params, write_csv
from .mixtures import innovation_moments
from .process import DEFAULT_BURN_IN, process_moments, simulate
from .quadrature import DEFAULT_FIT_NODES
from .study import DEFAULT_REPS, DEFAULT_SIZES, STUDY_QUAD_NODES, StudySpec, run_study

EXIT_OK = 0
EXIT_MODEL = 1
EXIT_IO = 2

logger = logging.getLogger("minar")


# formatting --------------------------------------------------------------------

def criteria_row(name, loglik, k, n_obs):
    """Dict with loglik, aic_standard, aic_paper and bic for one model."""
    aic_s, aic_p, bic = information_criteria(loglik, k, n_obs)
    return {"model": name, "loglik": loglik, "k": k, "aic_standard": aic_s, "aic_paper": aic_p,
            "bic": bic, "error": None}


def format_comparison(rows):
    """Fixed-point table with 4 decimals; '*' marks the lowest standard AIC."""
    ok = [r for r in rows if r["error"] is None]
    best = min(ok, key=lambda r: r["aic_standard"])["model"] if ok else None
    head = f"{'Model':<24}{'k':>4}{'Log-Like':>16}{'AIC':>14}{'AIC(k)':>14}{'BIC':>14}"
    lines = [head, "-" * len(head)]
    for r in rows:
        if r["error"] is not None:
            lines.append(f"{r['model']:<24}{'':>4}  failed: {r['error']}")
            continue
        mark = " *" if r["model"] == best else ""
        lines.append(f"{r['model']:<24}{r['k']:>4}{r['loglik']:>16.4f}{r['aic_standard']:>14.4f}"
                     f"{r['aic_paper']:>14.4f}{r['bic']:>14.4f}{mark}")
    lines.append("AIC = -2 logL + 2k; AIC(k) = -2 logL + k; BIC = -2 logL + k log(n)")
    return "\n".join(lines) + "\n"


def format_fit_summary(report, columns=None):
    th = report.theta_hat
    n = th.dim
    columns = columns or [f"x{i + 1}" for i in range(n)]
    w = max(10, max(len(c) for c in columns) + 2)
    lines = [f"MINAR(1)-{th.family.upper()}  converged={str(report.converged).lower()}  "
             f"iterations={report.iterations}  quad_nodes={report.quad_nodes}",
             "".ljust(8) + "".join(c.rjust(w) for c in columns),
             "alpha".ljust(8) + "".join(f"{v:>{w}.4f}" for v in th.alpha),
             "mu".ljust(8) + "".join(f"{v:>{w}.4f}" for v in th.mu)]
    for i in range(n):
        lines.append(f"sigma[{i + 1}]".ljust(8) + "".join(f"{v:>{w}.4f}" for v in th.sigma[i]))
    row = criteria_row(f"MINAR(1)-{th.family.upper()}", report.loglik, th.n_free_params,
                       report.n_obs)
    lines.append("")
    lines.append(format_comparison([row]).rstrip("\n"))
    return "\n".join(lines) + "\n"


def format_moments(params, max_lag):
    inn = innovation_moments(params.innovations)
    proc = process_moments(params, max_lag=max_lag)
    parts = ["innovation mean", inn.mean, "innovation covariance", inn.cov,
             "innovation correlation", inn.corr, "process mean", proc.mean,
             "process covariance", proc.cov]
    for h in range(1, max_lag + 1):
        parts += [f"process autocovariance lag {h}", proc.autocov(h)]
    with np.printoptions(precision=6, suppress=True):
        return "\n".join(str(p) for p in parts) + "\n"


# subcommands -------------------------------------------------------------------

def cmd_simulate(args):
    params = load_params(args.params)
    x = simulate(params, args.T, burn_in=args.burn_in, seed=args.seed)
    if args.out in (None, "-"):
        sys.stdout.write(format_csv(x))
    else:
        write_csv(args.out, x)
    return EXIT_OK


def _fit_config(args):
    return FitConfig(quad_nodes=args.quad_nodes, tol=args.tol, max_iter=args.max_iter,
                     accelerate=args.accelerate)


def cmd_fit(args):
    data = load_csv(args.data)
    rep = fit(data.values, args.family, _fit_config(args))
    doc = rep.to_dict()
    doc["columns"] = data.columns
    doc["seed"] = args.seed
    if args.out:
        dump_json(args.out, doc)
    sys.stdout.write(format_fit_summary(rep, data.columns))
    return EXIT_OK


def cmd_moments(args):
    params = load_params(args.params)
    sys.stdout.write(format_moments(params, args.max_lag))
    return EXIT_OK


def compare_models(x, config):
    """Fit the two MINAR families and the two independent comparators."""
    n_obs = x.shape[0] - 1 if config.bic_uses_transitions else x.shape[0]
    rows = []
    for fam in ("pl", "gl"):
        name = f"MINAR(1)-{fam.upper()}"
        try:
            rep = fit(x, fam, config)
            rows.append(criteria_row(name, rep.loglik, rep.theta_hat.n_free_params, n_obs))
        except (MinarError, ArithmeticError, ValueError) as exc:
            rows.append({"model": name, "error": str(exc)})
    for fam, name in (("poisson", "Poisson-INAR(1)"), ("geometric", "Geometric-INAR(1)")):
        try:
            res = baselines.fit_baseline(x, fam, config.bic_uses_transitions)
            rows.append(criteria_row(name, res.loglik, res.k, n_obs))
        except (MinarError, ArithmeticError, ValueError) as exc:
            rows.append({"model": name, "error": str(exc)})
    return rows


def cmd_compare(args):
    data = load_csv(args.data)
    rows = compare_models(data.values, _fit_config(args))
    table = format_comparison(rows)
    sys.stdout.write(table)
    if args.out:
        dump_json(args.out, rows)
    return EXIT_OK


def cmd_study(args):
    scenarios = [s for item in args.scenario for s in item.split(",") if s.strip()]
    spec = StudySpec(family=args.family, scenarios=scenarios or ["A2B1C1"], sizes=args.sizes,
                     reps=args.reps, seed=args.seed, quad_nodes=args.quad_nodes, tol=args.tol,
                     max_iter=args.max_iter, accelerate=args.accelerate)
    res = run_study(spec, threads=args.threads)
    table = res.format_table() + "\n"
    if args.out:
        base = Path(args.out)
        base.parent.mkdir(parents=True, exist_ok=True)
        Path(f"{base}.csv").write_text(res.to_csv(), encoding="utf-8", newline="\n")
        Path(f"{base}.txt").write_text(table, encoding="utf-8", newline="\n")
        dump_json(f"{base}.meta.json", res.metadata())
    sys.stdout.write(table)
    return EXIT_OK


# parser ------------------------------------------------------------------------

def _sizes(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("no sizes given")
    return vals


def _positive_float(text):
    v = float(text)
    if not v > 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError("must be a positive number")
    return v


def _fit_flags(p, nodes):
    p.add_argument("--quad-nodes", type=int, default=nodes, help="Gauss-Hermite nodes per dimension")
    p.add_argument("--tol", type=_positive_float, default=1e-6, help="relative log-likelihood tolerance")
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--accelerate", action="store_true", help="SQUAREM extrapolation")


def build_parser():
    parser = argparse.ArgumentParser(prog="minar", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a series from a JSON parameter file")
    p.add_argument("params")
    p.add_argument("-T", "--length", dest="T", type=int, required=True)
    p.add_argument("--burn-in", type=int, default=DEFAULT_BURN_IN)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit MINAR(1) by EM to a CSV series")
    p.add_argument("data")
    p.add_argument("--family", choices=["pl", "gl"], default="pl")
    _fit_flags(p, DEFAULT_FIT_NODES)
    p.add_argument("--seed", type=int, default=None, help="recorded in the report; EM is deterministic")
    p.add_argument("--out", default=None, help="JSON report path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("moments", help="closed-form innovation and process moments")
    p.add_argument("params")
    p.add_argument("--max-lag", type=int, default=3)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("compare", help="MINAR(1)-PL/GL against independent INAR(1) fits")
    p.add_argument("data")
    _fit_flags(p, DEFAULT_FIT_NODES)
    p.add_argument("--out", default=None, help="JSON table path")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("study", help="bias/SD simulation study over the scenario grid")
    p.add_argument("--family", choices=["pl", "gl"], default="pl")
    p.add_argument("--scenario", action="append", default=[],
                   help="e.g. A2B1C1; repeat or comma-separate for several")
    p.add_argument("--sizes", type=_sizes, default=list(DEFAULT_SIZES))
    p.add_argument("--reps", type=int, default=DEFAULT_REPS)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--quad-nodes", type=int, default=STUDY_QUAD_NODES)
    p.add_argument("--tol", type=_positive_float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--no-accelerate", dest="accelerate", action="store_false")
    p.add_argument("--threads", type=int, default=None, help="worker count (default: $MINAR_THREADS)")
    p.add_argument("--out", default=None, help="output prefix for .csv, .txt and .meta.json")
    p.set_defaults(func=cmd_study)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, DataError, ConfigError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (MinarError, ArithmeticError, ValueError) as exc:
        if getattr(exc, "key_path", None):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
