"""
conicbench command line
=======================
Subcommands:
    profile   intrinsic volumes of a cone, with δ and δ* footer
    figure1   circular-cone quotient curves s^r ν_r(C_m(t)) / ν_r(C_m(st))
    figure2   bound curves, empirical curves and mean markers for a cone pair
    classify  biconic feasibility report for a matrix file
    checks    moment-comparison and Gordon-type checks, logged to the ledger
    history   report over the check ledger

Exit codes: 0 success, 2 bad input, 3 numerical failure, 4 unsupported cone
combination.
"""

import argparse
import math
import os
import sys
from dataclasses import replace
from typing import List, Optional

import numpy as np
from colorama import init, Fore, Style
from tabulate import tabulate

import analytics
import bounds
import check_logger
import feasibility
import geometry
from config import OUT_DIR, MIN_TRIALS
from cones import Circular, parse_cone, cone_slug
from restricted import DEFAULT_SOLVER
from utils_conic import (logger, read_matrix, write_table, ConicError, ConeParseError, DimensionMismatch,
                         DomainError, HypothesisViolation, AlreadyFeasible, SolverError, QuadratureError,
                         UnsupportedProjection, ZeroConeError)

init()

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_UNSUPPORTED = 4

_EXIT_CODES = [
    ((ConeParseError, DimensionMismatch, DomainError, HypothesisViolation, AlreadyFeasible), EXIT_INPUT),
    ((SolverError, QuadratureError), EXIT_NUMERIC),
    ((UnsupportedProjection, ZeroConeError), EXIT_UNSUPPORTED),
]


def exit_code_for(err: Exception) -> int:
    for types, code in _EXIT_CODES:
        if isinstance(err, types):
            return code
    return EXIT_NUMERIC


def _fmt(x: float) -> str:
    return f"{x:g}".replace(".", "p").replace("-", "m")


def table_name(kind: str, cone_c: str, cone_d: str, params: str) -> str:
    return f"{kind}_{cone_c}_{cone_d}_{params}.table"


def parse_grid(text: str) -> np.ndarray:
    """'a:b:n' -> n equally spaced points from a to b."""
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like a:b:n, got '{text}'")
    if n < 2 or not b > a:
        raise argparse.ArgumentTypeError(f"grid needs b > a and n >= 2, got '{text}'")
    return np.linspace(a, b, n)


def _cone(text: str):
    return parse_cone(text, os.getcwd())


def _require_seed(args) -> int:
    if args.seed is None:
        raise DomainError(f"'{args.command}' is stochastic and needs --seed")
    return args.seed


def _solver(args):
    cfg = bounds.TRIAL_SOLVER
    if getattr(args, "starts", None):
        cfg = replace(cfg, multistarts=args.starts)
    return cfg


# --- Subcommands ---

def cmd_profile(args) -> int:
    C = _cone(args.cone)
    trials = args.trials or geometry.DEFAULT_MC_TRIALS
    p = geometry.profile(C, trials, args.seed)
    text = p.to_text() + f"# sdim={p.sdim():.8e}\n# gwidth_sq={p.gwidth_sq():.8e}\n"
    if args.out_file:
        os.makedirs(os.path.dirname(args.out_file) or ".", exist_ok=True)
        with open(args.out_file, "w") as f:
            f.write(text)
        logger.info(f"profile of {C.describe()} written to {args.out_file}")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_figure1(args) -> int:
    grid = args.grid if args.grid is not None else geometry.figure1_grid()
    if np.any(grid <= 0):
        raise DomainError("figure1 grid must stay in t > 0")
    rows = []
    for m in args.m:
        if m < 2:
            raise DomainError(f"figure1 needs m >= 2, got {m}")
        for r in args.r:
            values = geometry.circular_quotient_curve(m, args.s, r, grid)
            name = table_name("quotient", f"circ-{m}", f"image-s{_fmt(args.s)}", f"r{_fmt(r)}")
            write_table(os.path.join(args.out, name), grid, values)
            i = int(np.argmin(values))
            rows.append([m, r, values[i], grid[i], values.max(), "yes" if values[i] >= 1 - 1e-9 else "no"])
    logger.info(f"figure1: {len(rows)} tables written to {args.out}")
    print(tabulate(rows, headers=["m", "r", "min", "argmin t", "max", ">= 1"], floatfmt=".6f"))
    return EXIT_OK


def cmd_figure2(args) -> int:
    seed = _require_seed(args)
    C, D = _cone(args.coneC), _cone(args.coneD)
    m, n = C.ambient, D.ambient
    trials = args.trials or 2000
    if trials < MIN_TRIALS:
        raise DomainError(f"figure2 needs at least {MIN_TRIALS} trials, got {trials}")
    cfg = _solver(args)

    pC, pD = geometry.profile(C, seed=seed), geometry.profile(D, seed=seed)
    dC, dD = pC.gwidth_sq(), pD.gwidth_sq()
    grids = {kind: args.grid if args.grid is not None else bounds.default_grid(kind, dC, dD)
             for kind in ("sv", "norm")}

    curves = []
    for kind in ("sv", "norm"):
        curves.append(bounds.conc_bound(kind, grids[kind], dC, dD))
        curves.append(bounds.iv_bound(kind, grids[kind], pC, pD))
        curves.append(bounds.empirical_curve(kind, C, D, n, m, grids[kind], trials, seed, cfg, args.workers))

    emp_sv, emp_norm = curves[2], curves[5]
    markers = {
        "mean_empirical_sv": emp_sv.meta["mean"],
        "mean_estimated_sv": math.sqrt(dD) - math.sqrt(dC),
        "mean_empirical_norm": emp_norm.meta["mean"],
        "mean_estimated_norm": math.sqrt(dD) + math.sqrt(dC),
    }

    slug_c, slug_d = cone_slug(C), cone_slug(D)
    params = f"n{n}_m{m}_T{trials}_seed{seed}"
    written = []
    for curve in curves:
        written.append(curve.write(os.path.join(args.out, table_name(curve.kind, slug_c, slug_d, params))))
    for label, mu in markers.items():
        marker = bounds.mean_marker(mu, label)
        written.append(marker.write(os.path.join(args.out, table_name(label, slug_c, slug_d, params))))

    logger.info(f"figure2: {len(written)} tables written to {args.out}")
    unreliable = emp_sv.meta["unreliable"] + emp_norm.meta["unreliable"]
    rows = [[os.path.basename(p)] for p in written]
    print(tabulate(rows, headers=["table"]))
    print(f"delta*(C)={dC:.6f} delta*(D)={dD:.6f} unreliable_trials={unreliable}")
    return EXIT_OK


def cmd_classify(args) -> int:
    A = read_matrix(args.matrix)
    C, D = _cone(args.coneC), _cone(args.coneD)
    cfg = DEFAULT_SOLVER.with_seed(args.seed if args.seed is not None else 0)
    if args.starts:
        cfg = replace(cfg, multistarts=args.starts)
    report = feasibility.classify(A, C, D, cfg, tol=args.tol)
    sys.stdout.write(report.to_text())
    return EXIT_OK


def default_moment_functions() -> List[geometry.MomentFunction]:
    return [
        geometry.MomentFunction.identity(),
        geometry.MomentFunction.power(2.0),
        geometry.MomentFunction.exp_scaled(0.25),
        geometry.MomentFunction.step(1.0),
    ]


def cmd_checks(args) -> int:
    seed = _require_seed(args)
    C, D = _cone(args.coneC), _cone(args.coneD)
    trials = args.trials or 10_000
    fs = default_moment_functions()

    results = bounds.check_thm11_all(fs, C, D, trials, seed, cfg=_solver(args), workers=args.workers)

    instances = bounds.gordon_catalog(C, D, seed)
    if isinstance(C, Circular) and C.axis_sign > 0:
        instances.append(bounds.linear_image_instance(C.ambient, 2.0, t=C.t))
    for inst in instances:
        for f in fs:
            try:
                results.append(bounds.check_gordon_variant(inst, f, trials, seed, args.workers))
            except HypothesisViolation as e:
                logger.info(f"skipping {f.label} on {inst.tag}: {e}")

    rows = []
    for check in results:
        check_logger.log_check(check, C.describe(), D.describe(), trials=trials, seed=seed)
        verdict = Fore.GREEN + "PASS" + Style.RESET_ALL if check.holds else Fore.RED + "FAIL" + Style.RESET_ALL
        rows.append([check.name, check.meta.get("f", ""), check.lhs_mean, check.direction, check.rhs_mean,
                     check.satisfied_within, verdict])
    print(tabulate(rows, headers=["check", "f", "lhs", "", "rhs", "margin (SE)", ""], floatfmt=".5g"))
    logger.info(f"checks: {len(results)} results logged to {check_logger.LOG_FILE}")
    return EXIT_OK


def cmd_history(args) -> int:
    analytics.summarize_checks(args.check)
    return EXIT_OK


# --- Parser ---

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conicbench",
        description="Conic condition, intrinsic volumes and Gaussian comparison experiments",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, stochastic=True):
        p.add_argument("--seed", type=int, default=None, help="master seed (required for sampling)")
        if stochastic:
            p.add_argument("--trials", type=int, default=None, help="Monte Carlo trials")
            p.add_argument("--workers", type=int, default=None, help="worker threads (never changes output)")

    p = sub.add_parser("profile", help="intrinsic volumes of a cone")
    p.add_argument("cone", help="cone in the text grammar, e.g. 'circ 100 1.0'")
    p.add_argument("--out-file", default=None, help="also write the profile to this file")
    common(p)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("figure1", help="circular-cone quotient tables")
    p.add_argument("--m", type=int, nargs="+", default=[50, 100, 200])
    p.add_argument("--r", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    p.add_argument("--s", type=float, default=2.0, help="conditioning factor of diag(1, s, ..., s)")
    p.add_argument("--grid", type=parse_grid, default=None, help="t grid a:b:n (default 0.01..1.00)")
    p.add_argument("--out", default=OUT_DIR)
    p.set_defaults(func=cmd_figure1)

    p = sub.add_parser("figure2", help="bound and empirical distribution tables")
    p.add_argument("--coneC", required=True)
    p.add_argument("--coneD", required=True)
    p.add_argument("--grid", type=parse_grid, default=None, help="lambda grid a:b:n for every curve")
    p.add_argument("--starts", type=int, default=None, help="solver multistarts per trial")
    p.add_argument("--out", default=OUT_DIR)
    common(p)
    p.set_defaults(func=cmd_figure2)

    p = sub.add_parser("classify", help="feasibility report for a matrix file")
    p.add_argument("matrix", help="matrix file with header '# n m'")
    p.add_argument("--coneC", required=True)
    p.add_argument("--coneD", required=True)
    p.add_argument("--tol", type=float, default=None, help="distance threshold (default FEAS_TOL * ||A||)")
    p.add_argument("--starts", type=int, default=None, help="solver multistarts")
    common(p, stochastic=False)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("checks", help="run the comparison-inequality catalog and log the outcomes")
    p.add_argument("--coneC", required=True)
    p.add_argument("--coneD", required=True)
    p.add_argument("--starts", type=int, default=None, help="solver multistarts per trial")
    common(p)
    p.set_defaults(func=cmd_checks)

    p = sub.add_parser("history", help="summary of the check ledger")
    p.add_argument("--check", default=None, help="restrict to one check name")
    p.set_defaults(func=cmd_history)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConicError as e:
        code = exit_code_for(e)
        logger.error(f"{args.command} failed ({type(e).__name__}): {e}")
        print(Fore.RED + f"Error: {e}" + Style.RESET_ALL, file=sys.stderr)
        return code
    except OSError as e:
        logger.error(f"{args.command} failed: {e}")
        print(Fore.RED + f"Error: {e}" + Style.RESET_ALL, file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
