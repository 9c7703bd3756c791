"""Square-root polarization model for fuel-cell branches.

A stack's voltage is modeled as V(I) = a + b*sqrt(I) with a >= 0 and b < 0,
so branch power P(I) = phi*V(I)*I is strictly concave in I. Branches with
several stacks in series (equal current) reduce exactly to a single
equivalent stack by summing the phi-weighted coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


class NetworkValidationError(ValueError):
    """A network definition violates a model invariant."""


@dataclass(frozen=True)
class SqrtStackParams:
    """V-I fit coefficients of one stack: V = a + b*sqrt(I).

    a is in volts, b in volts per sqrt(ampere) (b < 0 required), phi is the
    stack's electrical efficiency in (0, 1].
    """

    a: float
    b: float
    phi: float = 1.0


@dataclass(frozen=True)
class BranchSpec:
    """One parallel branch: stacks in series plus current bounds in amperes.

    All stacks in a branch carry the same current, so bounds live on the
    branch. i_ub may be math.inf.
    """

    stacks: tuple[SqrtStackParams, ...]
    i_lb: float = 0.0
    i_ub: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "stacks", tuple(self.stacks))


@dataclass(frozen=True)
class Network:
    """Parallel network of branches sharing a power bus."""

    branches: tuple[BranchSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))

    @property
    def n_branches(self) -> int:
        return len(self.branches)


@dataclass(frozen=True)
class EquivalentStack:
    """Single-stack surrogate for a branch, efficiency folded into a_eq/b_eq.

    i_ub_eff caps the declared bound at the current where branch power peaks
    (dP/dI = 0); currents beyond that point deliver less power for more
    current and are never part of a minimum-current operating point.
    """

    a_eq: float
    b_eq: float
    i_lb: float
    i_ub: float
    i_ub_eff: float

    def power(self, i: float) -> float:
        """Branch power in watts at current i: a_eq*i + b_eq*i**1.5."""
        if i < 0.0:
            raise ValueError(f"current must be nonnegative, got {i}")
        return self.a_eq * i + self.b_eq * i * math.sqrt(i)

    def marginal_power(self, i: float) -> float:
        """dP/dI in watts per ampere at current i: a_eq + 1.5*b_eq*sqrt(i)."""
        if i < 0.0:
            raise ValueError(f"current must be nonnegative, got {i}")
        return self.a_eq + 1.5 * self.b_eq * math.sqrt(i)

    def inverse_marginal(self, mu: float) -> float:
        """Current at which dP/dI equals mu, clamped to [i_lb, i_ub_eff].

        Total and monotone nonincreasing in mu; the clamp is applied in
        sqrt-current space so levels above a_eq land on the lower bound.
        """
        x = (mu - self.a_eq) / (1.5 * self.b_eq)
        if x <= math.sqrt(self.i_lb):
            return self.i_lb
        if x >= math.sqrt(self.i_ub_eff):
            return self.i_ub_eff
        return x * x


def effective_upper_bound(a_eq: float, b_eq: float, i_ub: float) -> float:
    """Smaller of the declared bound and the power-peak current (2a/3|b|)^2."""
    x_peak = 2.0 * a_eq / (3.0 * -b_eq)
    return min(i_ub, x_peak * x_peak)


def _check_stack(stack: SqrtStackParams, where: str) -> None:
    if not (stack.a >= 0.0 and math.isfinite(stack.a)):
        raise NetworkValidationError(f"{where}: a must be finite and >= 0, got {stack.a}")
    if not (stack.b < 0.0 and math.isfinite(stack.b)):
        raise NetworkValidationError(f"{where}: b must be finite and < 0, got {stack.b}")
    if not (0.0 < stack.phi <= 1.0):
        raise NetworkValidationError(f"{where}: phi must be in (0, 1], got {stack.phi}")


def _check_branch(branch: BranchSpec, where: str) -> None:
    if not branch.stacks:
        raise NetworkValidationError(f"{where}: branch has no stacks")
    for k, stack in enumerate(branch.stacks):
        _check_stack(stack, f"{where}.stacks[{k}]")
    if not (branch.i_lb >= 0.0 and math.isfinite(branch.i_lb)):
        raise NetworkValidationError(f"{where}: i_lb must be finite and >= 0, got {branch.i_lb}")
    if math.isnan(branch.i_ub) or branch.i_ub < branch.i_lb:
        raise NetworkValidationError(
            f"{where}: need i_lb <= i_ub, got i_lb={branch.i_lb}, i_ub={branch.i_ub}"
        )


def reduce_branch(branch: BranchSpec, index: int | None = None) -> EquivalentStack:
    """Collapse a series branch to its exact single-stack equivalent.

    a_eq and b_eq are the phi-weighted coefficient sums, which preserves
    branch power identically for every current.
    """
    where = "branch" if index is None else f"branches[{index}]"
    _check_branch(branch, where)
    a_eq = sum(s.phi * s.a for s in branch.stacks)
    b_eq = sum(s.phi * s.b for s in branch.stacks)
    i_ub_eff = effective_upper_bound(a_eq, b_eq, branch.i_ub)
    if i_ub_eff < branch.i_lb:
        # Power would be decreasing over the whole allowed range.
        raise NetworkValidationError(
            f"{where}: power peaks at {i_ub_eff:.6g} A, below i_lb={branch.i_lb}"
        )
    return EquivalentStack(
        a_eq=a_eq, b_eq=b_eq, i_lb=branch.i_lb, i_ub=branch.i_ub, i_ub_eff=i_ub_eff
    )


def validate_network(network: Network) -> Network:
    """Check every invariant, naming the offending branch/stack on failure."""
    if not network.branches:
        raise NetworkValidationError("network has no branches")
    for j, branch in enumerate(network.branches):
        reduce_branch(branch, index=j)
    return network


def reduce_network(network: Network) -> tuple[EquivalentStack, ...]:
    """Validate and reduce every branch, preserving branch order."""
    if not network.branches:
        raise NetworkValidationError("network has no branches")
    return tuple(reduce_branch(b, index=j) for j, b in enumerate(network.branches))


def as_equivalent_stacks(
    network: Network | Sequence[EquivalentStack],
) -> tuple[EquivalentStack, ...]:
    """Accept either a Network or pre-reduced stacks and return stacks."""
    if isinstance(network, Network):
        return reduce_network(network)
    return tuple(network)
