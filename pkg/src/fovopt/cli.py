"""``fovopt`` command-line entry point.

Subcommands: eval, optimize, sweep, bdrate, fit, simulate and synth.  On
failure a single JSON object describing the error is written to stderr and
the exit status is nonzero.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DomainError, FitError, Infeasible, InputError
from .io import (
    read_events_csv,
    read_sweep_csv,
    read_trace_csv,
    write_report,
    write_sweep_csv,
)
from .metrics import CSV_HEADER, bd_rate
from .model import load_constants, nqq, nqs, quality, save_constants
from .optimizer import DEFAULT_S_LEVELS, POLICIES, default_bandwidth_grid, solve, sweep
from .rate import SegmentConfig, get_profile, load_profiles

EXIT_INPUT = 3
EXIT_DOMAIN = 4
EXIT_INFEASIBLE = 5


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:n`` (geometric), ``lin:lo:hi:n``, ``geom:lo:hi:n`` or ``b1,b2,...``."""
    try:
        parts = text.split(":")
        if len(parts) == 1:
            grid = np.array([float(x) for x in text.split(",") if x.strip()])
        else:
            kind = "geom"
            if parts[0] in ("lin", "geom"):
                kind, parts = parts[0], parts[1:]
            if len(parts) != 3:
                raise ValueError
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
            if not (0 < lo < hi and n >= 2):
                raise ValueError
            grid = np.linspace(lo, hi, n) if kind == "lin" else np.geomspace(lo, hi, n)
    except ValueError:
        raise DomainError(f"bad bandwidth grid {text!r}; use lo:hi:n, lin:lo:hi:n "
                          "or a comma list") from None
    if grid.size == 0 or not np.all(grid > 0) or np.any(np.diff(grid) <= 0):
        raise DomainError(f"bandwidth grid {text!r} must be positive and strictly increasing")
    return grid


def _levels(text: str) -> tuple[float, ...]:
    vals = []
    for x in text.split(","):
        x = x.strip()
        num, _, den = x.partition("/")
        vals.append(float(num) / float(den) if den else float(num))
    return tuple(vals)


def _profile(args):
    p = get_profile(args.profile, load_profiles(args.profiles))
    if getattr(args, "r_fov", None) is not None:
        p = p.with_fov(args.r_fov)
    return p


def _policy_opts(args) -> dict:
    opts = {}
    if args.s_levels is not None:
        opts["s_levels"] = _levels(args.s_levels)
    return opts


def _emit(text: str, output: str | None) -> None:
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_eval(args) -> int:
    c = load_constants(args.constants)
    q = quality(args.tau, args.qhat, args.shat, c)
    print(f"Q = {float(q)!r}")
    print(f"Q_norm = {float(q) / c.q_max_mos!r}")
    print(f"NQQ = {float(nqq(args.tau, args.qhat, c))!r}")
    print(f"NQS = {float(nqs(args.tau, args.shat, c))!r}")
    return 0


def cmd_optimize(args) -> int:
    c = load_constants(args.constants)
    p = _profile(args)
    res = solve(args.policy, p, SegmentConfig(args.B, args.T), c, **_policy_opts(args))
    row = {"profile": p.name, "policy": args.policy, "T": args.T, **res.as_row()}
    print(json.dumps(row, indent=2))
    return 0


def cmd_sweep(args) -> int:
    c = load_constants(args.constants)
    p = _profile(args)
    grid = parse_grid(args.B_grid) if args.B_grid else default_bandwidth_grid(p)
    curve = sweep(p, c, args.policy, grid, args.T, workers=args.workers, **_policy_opts(args))
    extra = {"constants": c.to_json_dict(), "profile_params": {
        "r_max": p.r_max, "alpha": p.alpha, "beta": p.beta, "r_fov": p.r_fov}}
    write_sweep_csv(curve, sys.stdout if args.output in (None, "-") else args.output, extra)
    return 0


def cmd_bdrate(args) -> int:
    test = read_sweep_csv(args.test)
    anchor = read_sweep_csv(args.anchor)
    cmp = bd_rate(test, anchor, fit_points=args.fit_points)
    name = test.profile or Path(args.test).stem
    if args.json:
        print(cmp.to_json(name))
    else:
        print(CSV_HEADER)
        print(cmp.csv_row(name))
    return 0


def cmd_fit(args) -> int:
    from .calibration import calibrate, read_ratings_csv

    c = load_constants(args.constants)
    ratings = read_ratings_csv(args.ratings)
    report = calibrate(ratings, q_max=args.q_max, grouping=args.grouping, ddof=args.ddof, base=c)
    summary = report.summary()
    if args.output:
        save_constants(report.constants, args.output)
    text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    _emit(text, args.report)
    return 0


def cmd_simulate(args) -> int:
    from .simulator import simulate

    c = load_constants(args.constants)
    p = _profile(args)
    trace = read_trace_csv(args.trace)
    events = read_events_csv(args.events)
    report = simulate(trace, events, p, args.policy, args.T, c, **_policy_opts(args))
    extra = {"trace": str(args.trace), "events": str(args.events),
             "constants": c.to_json_dict()}
    if args.output:
        write_report(report, args.output, args.summary, extra)
    print(json.dumps(report.summary(), indent=2, sort_keys=True))
    return 0


def cmd_synth(args) -> int:
    from .calibration import joint_conditions, q_conditions, s_conditions, synthetic_panel
    from .calibration.ratings import write_ratings_csv

    c = load_constants(args.constants)
    design = {"q": q_conditions(c=c), "s": s_conditions(), "joint": joint_conditions(c=c)}
    conds = []
    for d in args.design.split(","):
        if d == "all":
            conds += design["q"] + design["s"] + design["joint"]
        elif d in design:
            conds += design[d]
        else:
            raise DomainError(f"unknown design {d!r}; choose q, s, joint or all")
    videos = [f"V{i + 1:02d}" for i in range(args.videos)]
    ratings = synthetic_panel(videos, args.subjects, conds, noise_sd=args.noise, seed=args.seed,
                              c=c, subject_bias_sd=args.subject_bias,
                              integer_scores=not args.continuous)
    write_ratings_csv(ratings, args.output)
    print(f"wrote {len(ratings)} ratings to {args.output}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fovopt", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--constants", help="model constants JSON (default: bundled set)")
    common.add_argument("--profiles", help="content profiles JSON "
                        "(default: $FOVOPT_PROFILES, then the bundled set)")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized steps")
    common.add_argument("-v", "--verbose", action="store_true")

    def policy_args(p, need_B):
        p.add_argument("--profile", required=True)
        p.add_argument("--r-fov", type=float, help="override the profile's FoV rate (Mbps)")
        p.add_argument("--policy", choices=POLICIES, default="model-fully-discrete")
        p.add_argument("--T", type=float, required=True, help="initialization duration (s)")
        p.add_argument("--s-levels", help=f"comma list, default "
                       f"{','.join(f'{s:g}' for s in DEFAULT_S_LEVELS)}")
        if need_B:
            p.add_argument("--B", type=float, required=True, help="bandwidth (Mbps)")

    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", parents=[common], help="evaluate Q(tau, q_hat, s_hat)")
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--qhat", type=float, required=True)
    p.add_argument("--shat", type=float, required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("optimize", parents=[common], help="optimal representation at one B")
    policy_args(p, need_B=True)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", parents=[common], help="optimize over a bandwidth grid")
    policy_args(p, need_B=False)
    p.add_argument("--B-grid", help="lo:hi:n (geometric), lin:lo:hi:n or b1,b2,...")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bdrate", parents=[common], help="BD-rate of two sweep CSVs")
    p.add_argument("test")
    p.add_argument("anchor")
    p.add_argument("--fit-points", choices=("all", "overlap"), default="all")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bdrate)

    p = sub.add_parser("fit", parents=[common], help="calibrate constants from ratings")
    p.add_argument("ratings")
    p.add_argument("--q-max", type=float, default=None)
    p.add_argument("--grouping", choices=("viewer", "pvs"), default="viewer")
    p.add_argument("--ddof", type=int, default=1)
    p.add_argument("-o", "--output", help="write fitted constants JSON here")
    p.add_argument("--report", help="write the JSON report here (default stdout)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", parents=[common], help="replay a trace with FoV switches")
    policy_args(p, need_B=False)
    p.add_argument("--trace", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("-o", "--output", help="per-event report CSV")
    p.add_argument("--summary", help="JSON summary path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic ratings CSV")
    p.add_argument("--videos", type=int, default=4)
    p.add_argument("--subjects", type=int, default=15)
    p.add_argument("--design", default="all", help="comma list of q, s, joint, all")
    p.add_argument("--noise", type=float, default=0.25)
    p.add_argument("--subject-bias", type=float, default=0.0)
    p.add_argument("--continuous", action="store_true", help="do not round scores")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_synth)
    return ap


def _fail(code: int, exc: BaseException, **extra) -> int:
    doc = {"error": type(exc).__name__, "message": getattr(exc, "reason", None) or str(exc)}
    if isinstance(exc, InputError):
        doc["path"] = exc.path
        doc["line"] = exc.line
    doc.update(extra)
    sys.stderr.write(json.dumps(doc, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        return _fail(EXIT_INPUT, exc)
    except Infeasible as exc:
        return _fail(EXIT_INFEASIBLE, exc, min_bandwidth=exc.min_bandwidth)
    except (DomainError, FitError) as exc:
        return _fail(EXIT_DOMAIN, exc)
    except KeyError as exc:
        return _fail(EXIT_INPUT, exc, message=str(exc.args[0]) if exc.args else "")
    except OSError as exc:
        return _fail(EXIT_INPUT, exc, path=exc.filename, message=exc.strerror)


__all__ = ["build_parser", "main", "parse_grid"]

if __name__ == "__main__":
    sys.exit(main())
