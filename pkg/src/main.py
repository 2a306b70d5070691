"""Command-line entry point: run a solver and write its figure-ready artifact."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Callable, Sequence
from typing import Any

import pandas as pd

from src.corner import corner_sweep
from src.database import FORMATS, write_document, write_table
from src.errors import SearchError
from src.feasible import (
    alpha_interval,
    binding_constraints,
    contains,
    h_value,
    ic_curves,
    trace_boundary,
    virtual_demands,
)
from src.model import PricePair, SearchEnv, demand_profile, in_valid_region, social_values
from src.optimiser import (
    Contract,
    Direction,
    Objective,
    critical_threshold,
    first_best,
    solve,
)
from src.processor import (
    boundary_frame,
    corner_frame,
    demand_record,
    figure2_frame,
    figure3_frame,
    figure4_frame,
    phi_record,
    with_env,
)
from src.settings import (
    CERTIFICATE_RESOLUTION,
    CORNER_SWEEP_GRID,
    CRITICAL_COST_BRACKET,
    DEFAULT_BOUNDARY_RAYS,
    DEFAULT_CONSUMERS,
    DEFAULT_SEED,
    IC_CURVE_POINTS,
    MIN_BOUNDARY_RAYS,
    MIN_CERTIFICATE_RESOLUTION,
    NASH_GRID,
    NASH_TOL,
)
from src.simulation import SearchAlgorithm, find_equilibrium, simulate, verify_nash

# Set up logging
logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DOMAIN = 3

ALGORITHMS: dict[str, Callable[[argparse.Namespace], SearchAlgorithm]] = {
    "prominence1": lambda _: SearchAlgorithm.prominence(1),
    "prominence2": lambda _: SearchAlgorithm.prominence(2),
    "random": lambda _: SearchAlgorithm.random(),
    "price_directed": lambda args: SearchAlgorithm.price_directed(args.tie_alpha),
    "contract": lambda args: SearchAlgorithm.from_contract(
        Contract(args.p1, args.p2, args.alpha)
    ),
}


def _at_least(minimum: int) -> Callable[[str], int]:
    def parse(text: str) -> int:
        value = int(text)
        if value < minimum:
            raise argparse.ArgumentTypeError(f"must be at least {minimum}, got {value}")
        return value

    return parse


def _probability(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {value}")
    return value


def build_env(args: argparse.Namespace) -> SearchEnv:
    """Exactly one of --A and --s is given; the other is derived."""
    if args.A is not None:
        return SearchEnv.from_threshold(args.A)
    return SearchEnv.from_cost(args.s)


def figure2_points(env: SearchEnv) -> dict[str, PricePair]:
    """
    Equilibria under prominence for each seller and under random search.

    Each point is found by best-response dynamics from the centre of the
    diagonal and kept only when it is implementable and the algorithm's own
    search order lies in phi at that point; failures are logged.
    """
    curve_anchor = trace_boundary(env, MIN_BOUNDARY_RAYS).anchor
    start = PricePair(min(curve_anchor.p1, env.A), min(curve_anchor.p2, env.A))
    algorithms = {
        "PROMINENCE(1)": SearchAlgorithm.prominence(1),
        "PROMINENCE(2)": SearchAlgorithm.prominence(2),
        "RANDOM": SearchAlgorithm.random(),
    }
    points: dict[str, PricePair] = {}
    for label, algorithm in algorithms.items():
        equilibrium = find_equilibrium(env, algorithm, start)
        if equilibrium is None:
            logger.warning(f"No equilibrium found for {label}")
            continue
        inside = in_valid_region(env.A, equilibrium.p1, equilibrium.p2)
        if not (inside and contains(env, equilibrium)):
            logger.warning(f"{label} equilibrium {equilibrium.as_tuple()} lies outside P")
            continue
        on_path = float(algorithm.alpha(equilibrium.p1, equilibrium.p2))
        if not alpha_interval(env, equilibrium).contains(on_path):
            logger.warning(f"{label} order alpha={on_path} is not in phi{equilibrium.as_tuple()}")
            continue
        points[label] = equilibrium
    return points


def _run_demand(args: argparse.Namespace, env: SearchEnv) -> tuple[Any, dict[str, Any]]:
    prices = PricePair(args.p1, args.p2)
    record = demand_record(
        prices,
        demand_profile(env, prices, method=args.method),
        social_values(env, prices, method=args.method),
    )
    return record, {"d11": record["d11"], "d22": record["d22"], "bonus": record["bonus"]}


def _run_boundary(args: argparse.Namespace, env: SearchEnv) -> tuple[Any, dict[str, Any]]:
    curve = trace_boundary(env, args.n)
    summary = {
        "points": len(curve.points),
        "p_low": curve.p_low_diag,
        "p_high": curve.p_high_diag,
    }
    return boundary_frame(curve), summary


def _run_phi(args: argparse.Namespace, env: SearchEnv) -> tuple[Any, dict[str, Any]]:
    prices = PricePair(args.p1, args.p2)
    interval = alpha_interval(env, prices)
    binding = () if interval.empty else binding_constraints(env, prices, interval.midpoint)
    record = phi_record(
        prices, interval, h_value(env, prices), virtual_demands(env, prices), binding
    )
    return record, {"lo": record["lo"], "hi": record["hi"], "empty": record["empty"]}


def _run_solve(args: argparse.Namespace, env: SearchEnv) -> tuple[Any, dict[str, Any]]:
    result = solve(
        env,
        Objective(args.objective),
        Direction(args.direction),
        resolution=args.resolution,
        n_rays=args.n,
    )
    record = result.to_dict()
    summary = {key: record[key] for key in ("p1", "p2", "alpha", "value", "regime")}
    return record, summary


def _run_first_best(args: argparse.Namespace, env: SearchEnv) -> tuple[Any, dict[str, Any]]:
    record = first_best(env).to_dict()
    return record, {key: record[key] for key in ("p1", "p2", "alpha", "value")}


def _run_critical(args: argparse.Namespace, env: SearchEnv | None) -> tuple[Any, dict[str, Any]]:
    s_star = critical_threshold((args.s_min, args.s_max))
    record = {"s_star": s_star, "A_star": SearchEnv.from_cost(s_star).A}
    return record, dict(record)


def _run_verify(args: argparse.Namespace, env: SearchEnv) -> tuple[Any, dict[str, Any]]:
    algorithm = ALGORITHMS[args.algorithm](args)
    prices = PricePair(args.p1, args.p2)
    report = verify_nash(env, algorithm, prices, grid_n=args.grid, tol=args.tol)
    record = {"algorithm": algorithm.label, "p1": prices.p1, "p2": prices.p2, **report.to_dict()}
    return record, {"is_equilibrium": report.is_equilibrium}


def _run_simulate(args: argparse.Namespace, env: SearchEnv) -> tuple[Any, dict[str, Any]]:
    prices = PricePair(args.p1, args.p2)
    outcome = simulate(env, prices, args.alpha, n=args.consumers, seed=args.seed)
    record: dict[str, Any] = {"p1": prices.p1, "p2": prices.p2, **outcome.to_dict()}
    if in_valid_region(env.A, prices.p1, prices.p2):
        profile = demand_profile(env, prices)
        record["analytic"] = {
            "d11": profile.d11,
            "d12": profile.d12,
            "d21": profile.d21,
            "d22": profile.d22,
        }
    return record, {"demand1": outcome.demand1, "demand2": outcome.demand2}


def _run_corner(args: argparse.Namespace, env: SearchEnv) -> tuple[Any, dict[str, Any]]:
    frame = corner_frame(corner_sweep(env, args.grid))
    violations = int((frame["in_hat"] & ~frame["in_plain"]).sum())
    return frame, {"points": len(frame), "violations": violations}


def _run_figure2(args: argparse.Namespace, env: SearchEnv) -> tuple[Any, dict[str, Any]]:
    curve = trace_boundary(env, args.n)
    equilibria = figure2_points(env)
    summary = {label: list(pair.as_tuple()) for label, pair in equilibria.items()}
    return figure2_frame(curve, equilibria), summary


def _run_figure3(args: argparse.Namespace, env: SearchEnv) -> tuple[Any, dict[str, Any]]:
    frame = figure3_frame(ic_curves(env, args.alpha, args.points))
    return frame, {"rows": len(frame), "alpha": args.alpha}


def _run_figure4(args: argparse.Namespace, env: SearchEnv) -> tuple[Any, dict[str, Any]]:
    frame = figure4_frame(env, corner_sweep(env, args.grid))
    violations = int((frame["in_hat"] & ~frame["in_plain"]).sum())
    return frame, {"points": len(frame), "violations": violations}


COMMANDS: dict[str, Callable[[argparse.Namespace, Any], tuple[Any, dict[str, Any]]]] = {
    "demand": _run_demand,
    "boundary": _run_boundary,
    "phi": _run_phi,
    "solve": _run_solve,
    "first-best": _run_first_best,
    "critical": _run_critical,
    "verify": _run_verify,
    "simulate": _run_simulate,
    "corner": _run_corner,
    "figure2": _run_figure2,
    "figure3": _run_figure3,
    "figure4": _run_figure4,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="search-contracts",
        description="Solvers and verification for platform-designed consumer search.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    market = common.add_mutually_exclusive_group(required=True)
    market.add_argument("--A", type=float, help="reservation threshold A")
    market.add_argument("--s", type=float, help="search cost s")
    common.add_argument("--out", help="output file (CSV or JSON)")
    common.add_argument("--format", choices=FORMATS, help="output format; default from --out")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)

    prices = argparse.ArgumentParser(add_help=False)
    prices.add_argument("--p1", type=_probability, required=True)
    prices.add_argument("--p2", type=_probability, required=True)

    rays = argparse.ArgumentParser(add_help=False)
    rays.add_argument("--n", type=_at_least(MIN_BOUNDARY_RAYS), default=DEFAULT_BOUNDARY_RAYS)

    demand = subparsers.add_parser("demand", parents=[common, prices])
    demand.add_argument("--method", choices=("closed_form", "quadrature"))
    subparsers.add_parser("boundary", parents=[common, rays])
    subparsers.add_parser("phi", parents=[common, prices])

    solve_cmd = subparsers.add_parser("solve", parents=[common, rays])
    solve_cmd.add_argument("--objective", choices=[o.value for o in Objective], required=True)
    solve_cmd.add_argument("--direction", choices=[d.value for d in Direction], default="max")
    solve_cmd.add_argument(
        "--resolution",
        type=_at_least(MIN_CERTIFICATE_RESOLUTION),
        default=CERTIFICATE_RESOLUTION,
    )

    subparsers.add_parser("first-best", parents=[common])

    critical = subparsers.add_parser("critical", add_help=True)
    critical.add_argument("--s-min", type=float, default=CRITICAL_COST_BRACKET[0])
    critical.add_argument("--s-max", type=float, default=CRITICAL_COST_BRACKET[1])
    critical.add_argument("--out")
    critical.add_argument("--format", choices=FORMATS)

    verify = subparsers.add_parser("verify", parents=[common, prices])
    verify.add_argument("--algorithm", choices=sorted(ALGORITHMS), required=True)
    verify.add_argument("--alpha", type=_probability, default=0.5)
    verify.add_argument("--tie-alpha", type=_probability, default=0.5)
    verify.add_argument("--grid", type=_at_least(2), default=NASH_GRID)
    verify.add_argument("--tol", type=float, default=NASH_TOL)

    simulate_cmd = subparsers.add_parser("simulate", parents=[common, prices])
    simulate_cmd.add_argument("--alpha", type=_probability, required=True)
    simulate_cmd.add_argument("--consumers", type=_at_least(1), default=DEFAULT_CONSUMERS)

    for name in ("corner", "figure4"):
        sweep = subparsers.add_parser(name, parents=[common])
        sweep.add_argument("--grid", type=_at_least(2), default=CORNER_SWEEP_GRID)

    subparsers.add_parser("figure2", parents=[common, rays])

    figure3 = subparsers.add_parser("figure3", parents=[common])
    figure3.add_argument("--alpha", type=_probability, required=True)
    figure3.add_argument("--points", type=_at_least(2), default=IC_CURVE_POINTS)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    """
    Parse arguments, run one command and write its artifact.

    Returns:
        0 on success, 2 on a usage error, 3 on a domain or infeasibility error.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    try:
        env = None if args.command == "critical" else build_env(args)
        if env is not None:
            logger.info(f"Command {args.command} at A={env.A:.10f}, s={env.s:.10f}")
        payload, summary = COMMANDS[args.command](args, env)

        if env is not None and isinstance(payload, dict):
            payload = with_env(payload, env)
        if args.out:
            if isinstance(payload, pd.DataFrame):
                write_table(payload, args.out, args.format)
            else:
                write_document(payload, args.out, args.format)
    except SearchError as exc:
        logger.error(f"{args.command} failed: {exc}")
        return EXIT_DOMAIN

    if env is not None:
        summary = with_env(summary, env)
    else:
        summary = {"A": summary.get("A_star"), "s": summary.get("s_star"), **summary}
    print(json.dumps({"command": args.command, "out": args.out, **summary}, sort_keys=True))
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    """Main CLI entry point."""
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
