import math

import numpy as np
import pytest

from fcdispatch import (
    BranchSpec,
    Network,
    SqrtStackParams,
    effective_upper_bound,
    reduce_network,
)

# Three-stack benchmark network: one stack per branch, phi = 1.
BENCH3_ROWS = [
    # (a, b, i_lb, i_ub)
    (47.655, -1.297, 2.103, 106.8127),
    (39.895, -0.557, 0.0, 325.6562),
    (33.847, -0.5976, 6.646, 236.4155),
]

# Thirty-stack benchmark network: 15 branches, phi = 0.8, 0.1 <= I <= inf.
BENCH30_ROWS = [
    [(49.25, -0.25), (49.302, -0.302)],
    [(49.353, -0.353)],
    [(49.405, -0.405), (49.457, -0.457), (49.509, -0.509)],
    [(49.56, -0.56), (49.612, -0.612)],
    [(49.664, -0.664), (49.716, -0.716)],
    [(49.767, -0.767), (49.819, -0.819)],
    [(49.871, -0.871), (49.922, -0.922)],
    [(49.974, -0.974)],
    [(50.026, -1.026), (50.078, -1.078)],
    [(50.129, -1.129), (50.181, -1.181)],
    [(50.233, -1.233), (50.284, -1.284), (50.336, -1.336)],
    [(50.388, -1.388), (50.44, -1.44)],
    [(50.491, -1.491), (50.543, -1.543), (50.595, -1.595)],
    [(50.647, -1.647), (50.698, -1.698)],
    [(50.75, -1.75)],
]


def build_bench3_network() -> Network:
    return Network(
        branches=tuple(
            BranchSpec(stacks=(SqrtStackParams(a=a, b=b),), i_lb=lb, i_ub=ub)
            for a, b, lb, ub in BENCH3_ROWS
        )
    )


def build_bench30_network() -> Network:
    return Network(
        branches=tuple(
            BranchSpec(
                stacks=tuple(SqrtStackParams(a=a, b=b, phi=0.8) for a, b in row),
                i_lb=0.1,
                i_ub=math.inf,
            )
            for row in BENCH30_ROWS
        )
    )


def make_random_network(rng: np.random.Generator, n_branches: int | None = None) -> Network:
    """Random concave network in the property-test parameter ranges."""
    n = int(n_branches) if n_branches is not None else int(rng.integers(2, 11))
    branches = []
    for _ in range(n):
        stacks = tuple(
            SqrtStackParams(
                a=float(rng.uniform(30.0, 60.0)),
                b=float(rng.uniform(-2.0, -0.1)),
                phi=float(1.0 - rng.uniform(0.0, 0.5)),
            )
            for _ in range(int(rng.integers(1, 4)))
        )
        a_eq = sum(s.phi * s.a for s in stacks)
        b_eq = sum(s.phi * s.b for s in stacks)
        i_peak = effective_upper_bound(a_eq, b_eq, math.inf)
        i_lb = float(rng.uniform(0.0, 0.4) * i_peak)
        if rng.random() < 0.3:
            i_ub = math.inf
        else:
            i_ub = i_lb + float(rng.uniform(0.1, 1.2)) * i_peak
        branches.append(BranchSpec(stacks=stacks, i_lb=i_lb, i_ub=i_ub))
    return Network(branches=tuple(branches))


def power_range(network: Network) -> tuple[float, float]:
    """Feasible window computed by direct summation, bypassing the table."""
    stacks = reduce_network(network)
    return (
        sum(s.power(s.i_lb) for s in stacks),
        sum(s.power(s.i_ub_eff) for s in stacks),
    )


@pytest.fixture(scope="session")
def bench3_network() -> Network:
    return build_bench3_network()


@pytest.fixture(scope="session")
def bench3_stacks(bench3_network):
    return reduce_network(bench3_network)


@pytest.fixture(scope="session")
def bench30_network() -> Network:
    return build_bench30_network()


@pytest.fixture(scope="session")
def bench30_stacks(bench30_network):
    return reduce_network(bench30_network)


@pytest.fixture(scope="session")
def bench3_config_text() -> str:
    import json

    return json.dumps(
        {
            "version": "1",
            "branches": [
                {
                    "stacks": [{"a": a, "b": b, "phi": 1.0}],
                    "i_lb": lb,
                    "i_ub": ub,
                }
                for a, b, lb, ub in BENCH3_ROWS
            ],
        }
    )


@pytest.fixture(scope="session")
def bench30_config_text() -> str:
    import json

    return json.dumps(
        {
            "version": "1",
            "branches": [
                {
                    "stacks": [{"a": a, "b": b, "phi": 0.8} for a, b in row],
                    "i_lb": 0.1,
                    "i_ub": "inf",
                }
                for row in BENCH30_ROWS
            ],
        }
    )
