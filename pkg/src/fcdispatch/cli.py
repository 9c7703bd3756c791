"""Command-line front end: plan, solve, sweep, validate.

Exit codes: 0 success, 2 config/argument error, 3 infeasible demand,
4 validation mismatch. Data goes to stdout (or --output); diagnostics and
timings go to stderr so repeated invocations stay byte-identical.
"""

from __future__ import annotations

import argparse
import sys
import time

from .dispatch import (
    DispatchStatus,
    build_table,
    dispatch,
    dispatch_table,
)
from .netconfig import ConfigError, parse_network, serialize_result, sweep_to_csv
from .reference import compare, grid_bruteforce, lambda_bisection
from .stack_model import reduce_network

_VALIDATE_TOL_CURRENT = 1e-3  # amperes, per branch
_VALIDATE_GRID_POINTS = 200


def _load_network(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path!r}: {err}") from err
    return parse_network(text)


def _emit(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)


def _cmd_plan(args) -> int:
    network = _load_network(args.config)
    table = build_table(reduce_network(network))
    n = len(table.stacks)
    header = ["point", "dp_di", "branch", "kind", "cum_power"] + [
        f"i_{j + 1}" for j in range(n)
    ]
    rows = [" ".join(f"{h:>12}" for h in header)]
    for k, pt in enumerate(table.points):
        cells = [
            f"{k + 1:>12}",
            f"{pt.mu:>12.6f}",
            f"{pt.branch_index + 1:>12}",
            f"{pt.kind.value:>12}",
            f"{pt.cumulative_power:>12.3f}",
        ] + [f"{i:>12.4f}" for i in pt.snapshot_currents]
        rows.append(" ".join(cells))
    _emit("\n".join(rows) + "\n", args.output)
    return 0


def _cmd_solve(args) -> int:
    network = _load_network(args.config)
    result = dispatch(network, args.power)
    _emit(serialize_result(result), args.output)
    if result.status is not DispatchStatus.OPTIMAL:
        print(
            f"Required power cannot be obtained: feasible range is "
            f"[{result.feasible_range[0]:.3f}, {result.feasible_range[1]:.3f}] W",
            file=sys.stderr,
        )
        return 3
    return 0


def _cmd_sweep(args) -> int:
    if args.p_to < args.p_from:
        print("sweep: --to must be >= --from", file=sys.stderr)
        return 2
    if args.points < 2:
        print("sweep: --points must be >= 2", file=sys.stderr)
        return 2
    network = _load_network(args.config)
    table = build_table(reduce_network(network))
    step = (args.p_to - args.p_from) / (args.points - 1)
    demands = [args.p_from + k * step for k in range(args.points - 1)] + [args.p_to]
    results = [dispatch_table(table, p) for p in demands]
    _emit(sweep_to_csv(results, len(table.stacks)), args.output)
    return 0


def _cmd_validate(args) -> int:
    network = _load_network(args.config)

    t0 = time.perf_counter()
    result = dispatch(network, args.power)
    t_dispatch = time.perf_counter() - t0
    if result.status is not DispatchStatus.OPTIMAL:
        print("Required power cannot be obtained", file=sys.stderr)
        return 3

    t0 = time.perf_counter()
    oracle = lambda_bisection(network, args.power)
    t_oracle = time.perf_counter() - t0
    report = compare(result, oracle, _VALIDATE_TOL_CURRENT)

    lines = [
        f"demand: {args.power} W",
        f"dispatch total: {result.total_current:.6f} A",
        f"bisection total: {oracle.total_current:.6f} A",
        f"max branch delta: {report.max_branch_delta:.3e} A (tol {report.tol_current:.0e})",
    ]
    for j, d in enumerate(report.branch_deltas):
        lines.append(f"  branch {j + 1}: delta {d:+.3e} A")

    grid_ok = True
    if len(network.branches) <= 3:
        stacks = reduce_network(network)
        spacing = sum(
            (s.i_ub_eff - s.i_lb) / (_VALIDATE_GRID_POINTS - 1) for s in stacks[:-1]
        )
        t0 = time.perf_counter()
        grid = grid_bruteforce(stacks, args.power, _VALIDATE_GRID_POINTS)
        t_grid = time.perf_counter() - t0
        gap = grid.total_current - result.total_current
        grid_ok = -1e-6 <= gap <= spacing + 1e-6
        lines.append(
            f"grid total: {grid.total_current:.6f} A "
            f"(gap {gap:+.3e} A, allowance {spacing:.3e} A)"
        )
        print(f"grid search: {t_grid * 1e3:.3f} ms", file=sys.stderr)

    verdict = report.passed and grid_ok
    lines.append(f"result: {'PASS' if verdict else 'FAIL'}")
    _emit("\n".join(lines) + "\n", args.output)
    print(f"dispatch: {t_dispatch * 1e3:.3f} ms", file=sys.stderr)
    print(f"lambda bisection: {t_oracle * 1e3:.3f} ms", file=sys.stderr)
    return 0 if verdict else 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fcdispatch",
        description="Minimum-current dispatch for parallel fuel-cell stack networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="print the observable-point table")
    p_plan.add_argument("config")
    p_plan.add_argument("--output")
    p_plan.set_defaults(func=_cmd_plan)

    p_solve = sub.add_parser("solve", help="dispatch one power demand")
    p_solve.add_argument("config")
    p_solve.add_argument("--power", type=float, required=True, help="demand in watts")
    p_solve.add_argument("--output")
    p_solve.set_defaults(func=_cmd_solve)

    p_sweep = sub.add_parser("sweep", help="dispatch a range of demands as CSV")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--from", dest="p_from", type=float, required=True)
    p_sweep.add_argument("--to", dest="p_to", type=float, required=True)
    p_sweep.add_argument("--points", type=int, required=True)
    p_sweep.add_argument("--output")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_val = sub.add_parser("validate", help="cross-check dispatch against oracles")
    p_val.add_argument("config")
    p_val.add_argument("--power", type=float, required=True)
    p_val.add_argument("--output")
    p_val.set_defaults(func=_cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        # argparse exits 2 on bad arguments; keep that contract.
        return int(err.code or 0)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
