"""Minimum-current dispatch for parallel networks of fuel-cell stacks.

Given branches with square-root polarization curves V = a + b*sqrt(I) and a
power demand, computes the per-branch currents that deliver the demand with
the least total current, using an offline breakpoint table and an online
analytic active-set solve.
"""

from .dispatch import (
    ActiveSets,
    DispatchResult,
    DispatchStatus,
    DispatchTable,
    InfeasibleDemandError,
    KktReport,
    ObservablePoint,
    PointKind,
    SegmentCandidate,
    SegmentSolveError,
    build_table,
    dispatch,
    dispatch_table,
    feasible_power_range,
    locate_segment,
    select_feasible_root,
    solve_segment_numeric,
    solve_segment_sqrt,
    verify_kkt,
)
from .netconfig import (
    ConfigError,
    parse_network,
    serialize_network,
    serialize_result,
    sweep_to_csv,
)
from .poly_roots import CubicCoefficients, real_roots
from .reference import (
    ComparisonReport,
    OracleMethod,
    OracleResult,
    compare,
    grid_bruteforce,
    lambda_bisection,
)
from .stack_model import (
    BranchSpec,
    EquivalentStack,
    Network,
    NetworkValidationError,
    SqrtStackParams,
    effective_upper_bound,
    reduce_branch,
    reduce_network,
    validate_network,
)

__version__ = "0.1.0"

__all__ = [
    "ActiveSets",
    "BranchSpec",
    "ComparisonReport",
    "ConfigError",
    "CubicCoefficients",
    "DispatchResult",
    "DispatchStatus",
    "DispatchTable",
    "EquivalentStack",
    "InfeasibleDemandError",
    "KktReport",
    "Network",
    "NetworkValidationError",
    "ObservablePoint",
    "OracleMethod",
    "OracleResult",
    "PointKind",
    "SegmentCandidate",
    "SegmentSolveError",
    "SqrtStackParams",
    "build_table",
    "compare",
    "dispatch",
    "dispatch_table",
    "effective_upper_bound",
    "feasible_power_range",
    "grid_bruteforce",
    "lambda_bisection",
    "locate_segment",
    "parse_network",
    "real_roots",
    "reduce_branch",
    "reduce_network",
    "select_feasible_root",
    "serialize_network",
    "serialize_result",
    "solve_segment_numeric",
    "solve_segment_sqrt",
    "sweep_to_csv",
    "validate_network",
    "verify_kkt",
    "__version__",
]
