"""Minimum-current dispatch via an observable-point table and KKT active sets.

Offline, the 2N marginal-power values of the branches at their bounds are
sorted into a breakpoint table with precomputed per-branch currents and
cumulative power. Online, a demand is bracketed between two consecutive
breakpoints, branches pinned at a bound are subtracted out, and the interior
branches are solved for the common marginal level: analytically through a
cubic in the reference branch's sqrt-current for the square-root V-I model,
or by bisection on the level for any strictly concave model.

At the optimum every interior branch runs at the same dP/dI (the marginal
level mu); branches at their lower bound have a steeper affordable marginal
and branches at their upper bound a flatter one, which is exactly the KKT
multiplier sign condition certified by verify_kkt.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

from .poly_roots import CubicCoefficients, real_roots
from .stack_model import (
    EquivalentStack,
    Network,
    as_equivalent_stacks,
    reduce_network,
    validate_network,
)

# Relative power-balance tolerance for accepting an interior solve.
_POWER_RTOL = 1e-9
# Slack when testing a cubic root against its sqrt-current box, relative to
# the box scale: demands grazing a power peak make the root a tangency,
# computable only to ~sqrt(machine eps) of the scale.
_X_FEAS_RTOL = 1e-6
_BISECT_MAX_ITER = 200


class PointKind(enum.Enum):
    LOWER_BOUND = "lb"
    UPPER_BOUND = "ub"


class DispatchStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE_LOW = "infeasible_low"
    INFEASIBLE_HIGH = "infeasible_high"


class InfeasibleDemandError(ValueError):
    """Demand outside the network's obtainable power range."""

    def __init__(self, status: DispatchStatus, p_req: float, p_min: float, p_max: float):
        self.status = status
        self.p_req = p_req
        self.feasible_range = (p_min, p_max)
        super().__init__(
            f"Required power cannot be obtained: p_req={p_req} W outside "
            f"[{p_min}, {p_max}] W"
        )


class SegmentSolveError(RuntimeError):
    """Internal inconsistency: a located segment failed to solve cleanly."""


@dataclass(frozen=True)
class ObservablePoint:
    """Breakpoint where one branch enters or leaves a bound.

    mu is that branch's dP/dI at the bound; snapshot_currents holds every
    branch's current when the network runs exactly at this level.
    """

    mu: float
    branch_index: int
    kind: PointKind
    snapshot_currents: tuple[float, ...]
    cumulative_power: float


@dataclass(frozen=True)
class DispatchTable:
    """Offline product: breakpoints sorted by decreasing marginal level."""

    stacks: tuple[EquivalentStack, ...]
    points: tuple[ObservablePoint, ...]
    p_min: float
    p_max: float


@dataclass(frozen=True)
class ActiveSets:
    """Partition of branches for one demand segment (0-based indices).

    mu_high/mu_low are the marginal levels at the segment's low-power and
    high-power ends; p_req_eff is the demand left for the interior branches
    after subtracting the power of branches pinned at a bound.
    """

    at_lb: frozenset[int]
    interior: frozenset[int]
    at_ub: frozenset[int]
    p_req_eff: float
    mu_high: float
    mu_low: float


@dataclass(frozen=True)
class DispatchResult:
    status: DispatchStatus
    p_req: float
    feasible_range: tuple[float, float]
    currents: tuple[float, ...] | None = None
    total_current: float | None = None
    total_power: float | None = None
    mu: float | None = None
    sets: ActiveSets | None = None


@dataclass(frozen=True)
class SegmentCandidate:
    """One root of the segment cubic, mapped to interior branch currents.

    Feasibility must be judged on x_values (sqrt-currents): squaring can move
    a negative, infeasible x inside the current bounds. power_residual is the
    directly summed interior power minus the effective demand; near a power
    peak the expanded cubic cancels catastrophically and can report spurious
    "roots" whose direct residual is far from zero, so meets_demand (residual
    within tolerance) is part of candidate screening, not just the bounds.
    """

    x_ref: float
    x_values: tuple[float, ...]
    currents: tuple[float, ...]
    power_residual: float
    meets_demand: bool


@dataclass(frozen=True)
class KktReport:
    """First-order optimality certificate for an optimal dispatch.

    lambda_ is the power-constraint multiplier 1/mu; mu_multipliers and
    gamma_multipliers are the lower/upper bound multipliers (zero for
    branches where the bound is inactive, so complementary slackness holds
    by construction). Values within 1e-9 of zero are snapped to zero, since
    breakpoint demands make the exact multiplier zero up to rounding.
    """

    lambda_: float
    mu_multipliers: tuple[float, ...]
    gamma_multipliers: tuple[float, ...]
    max_equal_marginal_residual: float
    chain_ok: bool

    @property
    def ok(self) -> bool:
        """Pass flag: chain holds, residual <= 1e-6 W/A, multipliers >= 0."""
        return (
            self.chain_ok
            and self.max_equal_marginal_residual <= 1e-6
            and all(m >= 0.0 for m in self.mu_multipliers)
            and all(g >= 0.0 for g in self.gamma_multipliers)
        )


def build_table(stacks: Sequence[EquivalentStack]) -> DispatchTable:
    """Construct the 2N-point observable table for pre-reduced branches.

    Points are sorted by (mu descending, lower-bound kind first, branch
    index ascending) so equal-level ties are deterministic.
    """
    stacks = tuple(stacks)
    raw = []
    for j, s in enumerate(stacks):
        raw.append((s.marginal_power(s.i_lb), j, PointKind.LOWER_BOUND))
        raw.append((s.marginal_power(s.i_ub_eff), j, PointKind.UPPER_BOUND))
    raw.sort(key=lambda t: (-t[0], t[2] is not PointKind.LOWER_BOUND, t[1]))

    points = []
    for mu, j, kind in raw:
        snapshot = tuple(_current_at_level(s, mu) for s in stacks)
        cumulative = sum(s.power(i) for s, i in zip(stacks, snapshot))
        points.append(
            ObservablePoint(
                mu=mu,
                branch_index=j,
                kind=kind,
                snapshot_currents=snapshot,
                cumulative_power=cumulative,
            )
        )
    return DispatchTable(
        stacks=stacks,
        points=tuple(points),
        p_min=points[0].cumulative_power,
        p_max=points[-1].cumulative_power,
    )


def _current_at_level(s: EquivalentStack, mu: float) -> float:
    # Branch position when the network marginal level is mu: pinned at a
    # bound if the level has not reached (or has passed) it, interior else.
    if s.marginal_power(s.i_lb) <= mu:
        return s.i_lb
    if s.marginal_power(s.i_ub_eff) >= mu:
        return s.i_ub_eff
    return s.inverse_marginal(mu)


def feasible_power_range(table: DispatchTable) -> tuple[float, float]:
    """Obtainable power window (all branches at lb, all at effective ub)."""
    return (table.p_min, table.p_max)


def locate_segment(table: DispatchTable, p_req: float) -> ActiveSets:
    """Bracket the demand between consecutive breakpoints and split branches.

    A demand equal to a breakpoint power is assigned to the segment below
    it; both neighboring segments solve to the same currents there. Raises
    InfeasibleDemandError outside [p_min, p_max]; the window edges carry a
    1e-12 relative slack because equally valid summation orders of the same
    endpoint powers differ in the last ulp.
    """
    if math.isnan(p_req) or p_req < table.p_min - 1e-12 * max(1.0, abs(table.p_min)):
        raise InfeasibleDemandError(
            DispatchStatus.INFEASIBLE_LOW, p_req, table.p_min, table.p_max
        )
    if p_req > table.p_max + 1e-12 * max(1.0, abs(table.p_max)):
        raise InfeasibleDemandError(
            DispatchStatus.INFEASIBLE_HIGH, p_req, table.p_min, table.p_max
        )

    points = table.points
    p_scan = min(max(p_req, table.p_min), table.p_max)
    if p_scan <= points[0].cumulative_power:
        # Degenerate first segment: everything sits at its lower bound.
        return _classify(table, mu_high=points[0].mu, mu_low=points[0].mu, p_req=p_req)

    n = 1
    while points[n].cumulative_power < p_scan:
        n += 1
    return _classify(table, mu_high=points[n - 1].mu, mu_low=points[n].mu, p_req=p_req)


def _classify(table: DispatchTable, mu_high: float, mu_low: float, p_req: float) -> ActiveSets:
    at_lb, interior, at_ub = set(), set(), set()
    fixed_power = 0.0
    for j, s in enumerate(table.stacks):
        if s.marginal_power(s.i_lb) <= mu_low:
            at_lb.add(j)
            fixed_power += s.power(s.i_lb)
        elif s.marginal_power(s.i_ub_eff) >= mu_high:
            at_ub.add(j)
            fixed_power += s.power(s.i_ub_eff)
        else:
            interior.add(j)
    return ActiveSets(
        at_lb=frozenset(at_lb),
        interior=frozenset(interior),
        at_ub=frozenset(at_ub),
        p_req_eff=p_req - fixed_power,
        mu_high=mu_high,
        mu_low=mu_low,
    )


def solve_segment_sqrt(
    stacks: Sequence[EquivalentStack],
    interior: Sequence[int],
    p_req_eff: float,
    ref_branch: int | None = None,
) -> list[SegmentCandidate]:
    """Analytic equal-marginal solve for the interior branches.

    With x_j = sqrt(I_j), equal marginals tie every interior branch to the
    reference branch along x_j = g_j*x + h_j, and the power balance becomes
    a cubic in x. All real roots are returned as candidates; exactly one is
    feasible for a correctly located segment. The cubic's constant term
    (sum of b*h^3 + a*h^2) is nonzero whenever the branches' a-coefficients
    differ and must be kept.

    The solution does not depend on which interior branch is the reference;
    ref_branch (a branch index inside the interior set) overrides the
    default pick, the interior branch with the largest |b_eq|.
    """
    order = sorted(interior)
    if not order:
        raise SegmentSolveError("interior set is empty")
    sub = [stacks[j] for j in order]

    if ref_branch is None:
        ref = max(range(len(sub)), key=lambda k: abs(sub[k].b_eq))
    else:
        if ref_branch not in order:
            raise ValueError(f"ref_branch {ref_branch} is not in the interior set")
        ref = order.index(ref_branch)
    ar, br = sub[ref].a_eq, sub[ref].b_eq

    g = [br / s.b_eq for s in sub]
    h = [(ar - s.a_eq) / (1.5 * s.b_eq) for s in sub]

    c3 = sum(s.b_eq * gj ** 3 for s, gj in zip(sub, g))
    c2 = sum(3.0 * s.b_eq * gj ** 2 * hj + s.a_eq * gj ** 2 for s, gj, hj in zip(sub, g, h))
    c1 = sum(3.0 * s.b_eq * gj * hj ** 2 + 2.0 * s.a_eq * gj * hj for s, gj, hj in zip(sub, g, h))
    c0 = sum(s.b_eq * hj ** 3 + s.a_eq * hj ** 2 for s, gj, hj in zip(sub, g, h)) - p_req_eff

    roots = real_roots(CubicCoefficients(c3, c2, c1, c0))

    # A demand grazing the interior power peak (top of the last segment)
    # makes the wanted root a tangency; rounding can push that pair complex
    # so only the far simple root stays real. Recover it from the cubic's
    # stationary points, where the residual vanishes to rounding.
    residual_tol = _POWER_RTOL * max(1.0, abs(p_req_eff))
    for x, _mult in real_roots(CubicCoefficients(0.0, 3.0 * c3, 2.0 * c2, c1)):
        value = ((c3 * x + c2) * x + c1) * x + c0
        is_new = all(abs(x - r) > 1e-6 * max(1.0, abs(x)) for r, _m in roots)
        if abs(value) <= residual_tol and is_new:
            roots.append((x, 2))
    if not roots:
        raise SegmentSolveError("segment cubic has no real root")

    candidates = []
    for x, _mult in sorted(roots):
        x, gap = _polish_direct(sub, g, h, x, p_req_eff)
        xs = tuple(gj * x + hj for gj, hj in zip(g, h))
        candidates.append(
            SegmentCandidate(
                x_ref=x,
                x_values=xs,
                currents=tuple(v * v for v in xs),
                power_residual=gap,
                meets_demand=abs(gap) <= residual_tol,
            )
        )
    return candidates


def _polish_direct(sub, g, h, x: float, p_req_eff: float) -> tuple[float, float]:
    # Newton steps on the per-branch (unexpanded) form sum(a*x_j^2 + b*x_j^3),
    # which has the same roots as the expanded cubic but stays well
    # conditioned where the expansion cancels. For candidates inside the
    # bounds (x_j >= 0) this is exactly the physical power balance.
    def gap(v: float) -> float:
        total = 0.0
        for s, gj, hj in zip(sub, g, h):
            xj = gj * v + hj
            total += (s.a_eq + s.b_eq * xj) * xj * xj
        return total - p_req_eff

    best_x, best_gap = x, gap(x)
    for _ in range(3):
        slope = sum(
            (2.0 * s.a_eq + 3.0 * s.b_eq * (gj * x + hj)) * (gj * x + hj) * gj
            for s, gj, hj in zip(sub, g, h)
        )
        if slope == 0.0 or not math.isfinite(slope):
            break
        step = gap(x) / slope
        if x - step == x:
            break
        x -= step
        g_now = gap(x)
        if abs(g_now) < abs(best_gap):
            best_x, best_gap = x, g_now
        else:
            break
    return best_x, best_gap


def select_feasible_root(
    candidates: Sequence[SegmentCandidate],
    stacks: Sequence[EquivalentStack],
    interior: Sequence[int],
) -> SegmentCandidate:
    """Pick the candidate that respects the bounds and meets the demand.

    Raises SegmentSolveError when no candidate qualifies, which means the
    segment was located incorrectly (a bug, not a user error). Several
    qualifying candidates can appear when the demand grazes a power peak (a
    tangency split by rounding); the objective breaks the tie, so the
    smallest total current wins.
    """
    order = sorted(interior)
    qualified: list[SegmentCandidate] = []
    for cand in candidates:
        violation = 0.0
        for x, j in zip(cand.x_values, order):
            x_lo = math.sqrt(stacks[j].i_lb)
            x_hi = math.sqrt(stacks[j].i_ub_eff)
            scale = max(1.0, x_hi)
            violation = max(violation, (x_lo - x) / scale, (x - x_hi) / scale)
        if violation <= _X_FEAS_RTOL and cand.meets_demand:
            qualified.append(cand)
    if not qualified:
        raise SegmentSolveError(
            f"no feasible root meeting the demand among {len(candidates)} candidates"
        )
    return min(qualified, key=lambda c: sum(c.currents))


def solve_segment_numeric(
    stacks: Sequence[EquivalentStack],
    interior: Sequence[int],
    p_req_eff: float,
    mu_high: float,
    mu_low: float,
) -> tuple[float, ...]:
    """Bisection on the common marginal level; model-agnostic fallback.

    Interior power is continuous and nonincreasing in the level, so the
    segment's level window brackets the demand. Returns currents for the
    interior branches in ascending branch order.
    """
    order = sorted(interior)
    if not order:
        raise SegmentSolveError("interior set is empty")
    sub = [stacks[j] for j in order]

    def interior_power(mu: float) -> float:
        return sum(s.power(s.inverse_marginal(mu)) for s in sub)

    tol = _POWER_RTOL * max(1.0, abs(p_req_eff))
    lo, hi = mu_low, mu_high  # power(lo) >= p_req_eff >= power(hi)
    if interior_power(hi) - p_req_eff > tol or p_req_eff - interior_power(lo) > tol:
        raise SegmentSolveError("demand is not bracketed by the segment's level window")

    # Run the bracket down to float resolution; stopping at the power
    # tolerance alone would leave level errors that show up as more than
    # 1e-6 A on large branches.
    mu = 0.5 * (lo + hi)
    for _ in range(_BISECT_MAX_ITER):
        mu = 0.5 * (lo + hi)
        if mu == lo or mu == hi:
            break
        if interior_power(mu) - p_req_eff > 0.0:
            lo = mu
        else:
            hi = mu
    currents = tuple(s.inverse_marginal(mu) for s in sub)
    if abs(sum(s.power(i) for s, i in zip(sub, currents)) - p_req_eff) > tol:
        raise SegmentSolveError("segment bisection failed to meet the demand")
    return currents


def dispatch_table(table: DispatchTable, p_req: float) -> DispatchResult:
    """Online solve against a prebuilt table (shareable across demands)."""
    try:
        sets = locate_segment(table, p_req)
    except InfeasibleDemandError as err:
        return DispatchResult(
            status=err.status, p_req=p_req, feasible_range=err.feasible_range
        )

    # Demands sitting on a breakpoint take its precomputed snapshot: exact,
    # and well defined even at the degenerate top point where every branch
    # peaks and the interior solve is a tangency.
    for pt in table.points:
        if abs(pt.cumulative_power - p_req) <= _POWER_RTOL * max(1.0, abs(p_req)):
            psets = _classify(table, mu_high=pt.mu, mu_low=pt.mu, p_req=p_req)
            return DispatchResult(
                status=DispatchStatus.OPTIMAL,
                p_req=p_req,
                feasible_range=(table.p_min, table.p_max),
                currents=pt.snapshot_currents,
                total_current=sum(pt.snapshot_currents),
                total_power=pt.cumulative_power,
                mu=pt.mu,
                sets=psets,
            )

    stacks = table.stacks
    currents = [0.0] * len(stacks)
    for j in sets.at_lb:
        currents[j] = stacks[j].i_lb
    for j in sets.at_ub:
        currents[j] = stacks[j].i_ub_eff

    if sets.interior:
        order = sorted(sets.interior)
        candidates = solve_segment_sqrt(stacks, order, sets.p_req_eff)
        chosen = select_feasible_root(candidates, stacks, order)
        first = stacks[order[0]]
        mu = first.a_eq + 1.5 * first.b_eq * chosen.x_values[0]
        # The true level lies inside the segment's window; snap roundoff
        # excursions (worst at peak-grazing tangencies) back inside.
        mu = min(max(mu, sets.mu_low), sets.mu_high)
        for j, i in zip(order, chosen.currents):
            currents[j] = min(max(i, stacks[j].i_lb), stacks[j].i_ub_eff)
    else:
        # Flat segment: every branch pinned; any level in the window is
        # optimal and mu_low keeps all multipliers nonnegative.
        mu = sets.mu_low

    total_power = sum(s.power(i) for s, i in zip(stacks, currents))
    if abs(total_power - p_req) > _POWER_RTOL * max(1.0, abs(p_req)):
        raise SegmentSolveError(
            f"power balance violated: got {total_power} W for demand {p_req} W"
        )
    return DispatchResult(
        status=DispatchStatus.OPTIMAL,
        p_req=p_req,
        feasible_range=(table.p_min, table.p_max),
        currents=tuple(currents),
        total_current=sum(currents),
        total_power=total_power,
        mu=mu,
        sets=sets,
    )


def dispatch(network: Network | Sequence[EquivalentStack], p_req: float) -> DispatchResult:
    """Validate, reduce, build the table, and solve one demand."""
    if isinstance(network, Network):
        stacks = reduce_network(validate_network(network))
    else:
        stacks = tuple(network)
    return dispatch_table(build_table(stacks), p_req)


def _level_ratio(m: float, mu: float) -> float:
    if mu > 0.0:
        return m / mu
    return 1.0 if m == 0.0 else math.inf


def _snap_zero(v: float) -> float:
    return 0.0 if abs(v) < 1e-9 else v


def verify_kkt(
    result: DispatchResult, network: Network | Sequence[EquivalentStack]
) -> KktReport:
    """Certify first-order optimality of an optimal dispatch result.

    Checks that interior marginals agree with the reported level, that
    lower-bound marginals sit at or below it and upper-bound marginals at or
    above it (the multiplier nonnegativity chain), and that branches
    reported at a bound actually carry the bound current (complementary
    slackness). chain_ok covers all three.
    """
    if result.status is not DispatchStatus.OPTIMAL or result.sets is None:
        raise ValueError("verify_kkt requires an optimal dispatch result")
    stacks = as_equivalent_stacks(network)
    sets = result.sets
    mu = result.mu
    currents = result.currents

    residual = 0.0
    for j in sets.interior:
        residual = max(residual, abs(stacks[j].marginal_power(currents[j]) - mu))

    mu_mult = [0.0] * len(stacks)
    gamma_mult = [0.0] * len(stacks)
    chain_tol = 1e-9 * max(1.0, abs(mu))
    chain_ok = True
    for j in sets.at_lb:
        m = stacks[j].marginal_power(stacks[j].i_lb)
        mu_mult[j] = _snap_zero(1.0 - _level_ratio(m, mu))
        pinned = abs(currents[j] - stacks[j].i_lb) <= 1e-9 * max(1.0, stacks[j].i_lb)
        chain_ok = chain_ok and pinned and m <= mu + chain_tol
    for j in sets.at_ub:
        m = stacks[j].marginal_power(stacks[j].i_ub_eff)
        gamma_mult[j] = _snap_zero(_level_ratio(m, mu) - 1.0)
        pinned = abs(currents[j] - stacks[j].i_ub_eff) <= 1e-9 * max(1.0, stacks[j].i_ub_eff)
        chain_ok = chain_ok and pinned and m >= mu - chain_tol

    return KktReport(
        lambda_=1.0 / mu if mu > 0.0 else math.inf,
        mu_multipliers=tuple(mu_mult),
        gamma_multipliers=tuple(gamma_mult),
        max_equal_marginal_residual=residual,
        chain_ok=chain_ok,
    )
