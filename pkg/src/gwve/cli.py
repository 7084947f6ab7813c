"""Command-line front end.

Exit codes: 0 success, 2 input or validation error, 3 numerical
(truncation) failure, 4 simulation budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from .bounds import moment_sequences, rate_bound_report, rn_batch
from .environments import EnvironmentError_, classify, load_environment
from .estimators import (
    check_step_inequalities,
    estimate_equilibrium_identity,
    estimate_meanYYe_rhs,
    estimate_spine_law,
)
from .exact import TruncationError, conditional_law, conditional_law_auto, law_of_Zn, survival_prob_accurate
from .reproduce import EXAMPLES, run_example, write_example_csv
from .seqexpr import SeqExprError
from .spine import DEFAULT_CAP, CapError, RejectionBudgetExceeded
from .wasserstein import TailTooHeavy, dw_scaled_pmf_vs_exp

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_BUDGET = 0, 2, 3, 4


class InputError(Exception):
    pass


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _nonneg_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {v}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {v}")
    return v


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("generations must be positive")
    return vals


def _clean(x):
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def _dump_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _rows_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r[c]) for c in columns])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, str):
        return v
    return repr(float(v))


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


# --- commands -------------------------------------------------------------------


def cmd_classify(args) -> int:
    env = load_environment(args.env)
    rep = classify(env, args.n_max, eps_trend=args.eps_trend)
    for w in rep.warnings:
        _warn(w)
    if args.format == "json":
        _emit(_dump_json(rep.to_dict()), args.out)
    else:
        rows = rep.to_dict()["rows"]
        _emit(_rows_csv(("n", "mu", "rho", "mu_rho", "starstar_ok"), rows), args.out)
    return EXIT_OK


def cmd_exact(args) -> int:
    env = load_environment(args.env)
    n, K = args.n, args.trunc
    if K & (K - 1):
        raise InputError(f"--trunc must be a power of two, got {K}")
    Z = law_of_Zn(env, n, K, args.tol)
    Y, b = conditional_law(env, n, K, args.tol)
    surv = survival_prob_accurate(env, 0, n) if n else 1.0
    summary = {"n": n, "K": K, "b_n": b, "survival": surv, "tail_Zn": Z.tail_mass, "tail_Yn": Y.tail_mass}
    rows = [{"k": k, "p_Zn": Z.probs[k], "p_Yn": Y.probs[k]} for k in range(K)]
    if args.format == "json":
        _emit(_dump_json({**summary, "p_Zn": Z.probs.tolist(), "p_Yn": Y.probs.tolist()}), args.out)
    else:
        _emit(_rows_csv(("k", "p_Zn", "p_Yn"), rows), args.out)
        print(f"n={n} survival={surv!r} b_n={b!r} tail_Zn={Z.tail_mass!r} tail_Yn={Y.tail_mass!r}", file=sys.stderr)
    return EXIT_OK


def cmd_bounds(args) -> int:
    env = load_environment(args.env)
    if args.n_max < 2:
        raise InputError("r_n defined for n >= 2")
    rep = rate_bound_report(env, args.n_max)
    for w in rep.warnings:
        _warn(w)
    if args.format == "json":
        _emit(_dump_json({"warnings": rep.warnings, "rows": list(rep.rows())}), args.out)
    else:
        _emit(rep.to_csv(), args.out)
    return EXIT_OK


def cmd_wasserstein(args) -> int:
    env = load_environment(args.env)
    ns = args.ns or list(range(1, args.n_max + 1))
    N = max(max(ns), 2)
    track = moment_sequences(env, N)
    r = rn_batch(track)
    rows = []
    for n in ns:
        row = {"n": n, "dw": math.nan, "truncation_bound": math.nan, "b_n": math.nan, "thm4_shape": math.nan,
               "ratio": math.nan, "flag": ""}
        if n >= 2 and track.rho[n] > 0:
            row["thm4_shape"] = 1.0 / track.mu_rho[n] + r[n] / track.rho[n]
        if track.linear_fractional:
            row["lf_bound"] = 4.0 / (2.0 + track.mu_rho[n])
        try:
            if args.trunc:
                Y, b = conditional_law(env, n, args.trunc, args.tol)
            else:
                Y, b = conditional_law_auto(env, n, args.tol)
            d = dw_scaled_pmf_vs_exp(Y, b, mean=b)
            row.update(dw=d.value, truncation_bound=d.truncation_bound, b_n=b)
            row["ratio"] = d.value / row["thm4_shape"] if row["thm4_shape"] > 0 else math.nan
        except TruncationError as exc:
            row["flag"] = f"truncation: tail {exc.tail_mass:.2e} at K={exc.K}"
        except TailTooHeavy as exc:
            row["flag"] = f"tail: {exc}"
        except ArithmeticError as exc:
            row["flag"] = f"numerical: {exc}"
        rows.append(row)
    cols = ["n", "dw", "truncation_bound", "b_n", "thm4_shape", "ratio"]
    if track.linear_fractional:
        cols.append("lf_bound")
    cols.append("flag")
    if args.format == "json":
        _emit(_dump_json(rows), args.out)
    else:
        _emit(_rows_csv(cols, rows), args.out)
    return EXIT_OK


ESTIMATORS = ("spine-law", "equilibrium", "meanyye", "steps")


def cmd_simulate(args) -> int:
    env = load_environment(args.env)
    n, M, seed = args.n, args.samples, args.seed
    hist = None
    if args.estimator == "spine-law":
        res = estimate_spine_law(env, n, M, seed, args.workers, args.cap)
        hist = res.pop("histogram")
        res.pop("histogram_conditioned")
        res["estimate"] = res["tv_size_biased"]
        res["stderr"] = None
    elif args.estimator == "equilibrium":
        res = estimate_equilibrium_identity(env, n, M, seed, args.workers, args.cap)
        res["estimate"] = res["ks_gap"]
        res["stderr"] = None
    elif args.estimator == "meanyye":
        res = estimate_meanYYe_rhs(env, n, M, seed, args.workers, args.cap)
    else:
        rep = check_step_inequalities(env, n, M, seed, args.workers, args.cap)
        res = rep.to_dict()
        res["estimate"] = len(rep.violations)
        res["stderr"] = None
    res.update({"estimator": args.estimator, "M": M, "seed": seed})
    text = _dump_json(res)
    if args.out and Path(args.out).suffix != ".json":
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "estimate.json").write_text(text)
        if hist is not None:
            (outdir / "histogram.csv").write_text(
                _rows_csv(("k", "count"), [{"k": k, "count": c} for k, c in enumerate(hist)])
            )
    else:
        _emit(text, args.out)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    outdir = Path(args.out or "reproduce_out")
    outdir.mkdir(parents=True, exist_ok=True)
    names = args.examples or list(EXAMPLES)
    summary = {}
    for name in names:
        ns = None
        if args.n_max:
            ns = [n for n in EXAMPLES[name].ns if n <= args.n_max]
        res = run_example(name, ns)
        write_example_csv(res, outdir)
        summary[name] = {
            "diagnostic": res.spec.diagnostic_name,
            "max_over_min": res.ratio(),
            "max": float(np.nanmax(res.diagnostics())),
            "sources": sorted(res.sources()),
        }
        print(f"{name}: {res.spec.diagnostic_name} max/min = {res.ratio():.3f}", file=sys.stderr)
    (outdir / "summary.json").write_text(_dump_json(summary))
    return EXIT_OK


# --- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gwve", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, env=True):
        if env:
            sp.add_argument("--env", required=True, help="environment JSON file or builtin:NAME[:ARGS]")
        sp.add_argument("--out", help="output path (default: stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--tol", type=_positive_float, default=1e-8, help="tail-mass tolerance")

    sp = sub.add_parser("classify", help="moment ledger and criticality evidence")
    common(sp)
    sp.add_argument("--n-max", type=_positive_int, default=100)
    sp.add_argument("--eps-trend", type=_positive_float, default=0.05)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("exact", help="exact laws of Z_n and Y_n")
    common(sp)
    sp.add_argument("--n", type=_nonneg_int, required=True)
    sp.add_argument("--trunc", type=_positive_int, default=1024, help="truncation K (power of two)")
    sp.set_defaults(func=cmd_exact)

    sp = sub.add_parser("bounds", help="r_n, s_n and bound shapes for n = 2..N")
    common(sp)
    sp.add_argument("--n-max", type=_positive_int, required=True)
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("wasserstein", help="exact d_W(Y_n/b_n, Exp) against n")
    common(sp)
    sp.add_argument("--n-max", type=_positive_int, default=50)
    sp.add_argument("--ns", type=_int_list, help="explicit comma-separated generations")
    sp.add_argument("--trunc", type=_positive_int, help="fixed truncation K (default: automatic)")
    sp.set_defaults(func=cmd_wasserstein)

    sp = sub.add_parser("simulate", help="spine Monte Carlo estimators")
    common(sp)
    sp.add_argument("--estimator", choices=ESTIMATORS, required=True)
    sp.add_argument("--n", type=_nonneg_int, required=True)
    sp.add_argument("--samples", type=_positive_int, default=100_000)
    sp.add_argument("--seed", type=_nonneg_int, default=0)
    sp.add_argument("--workers", type=_positive_int, default=1)
    sp.add_argument("--cap", type=_positive_int, default=DEFAULT_CAP, help="population ceiling per path")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("reproduce", help="tables for the worked examples")
    common(sp, env=False)
    sp.add_argument("--examples", nargs="*", choices=tuple(EXAMPLES))
    sp.add_argument("--n-max", type=_positive_int, help="skip generations above this")
    sp.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, EnvironmentError_, SeqExprError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TruncationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CapError, RejectionBudgetExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
