"""Network config ingestion and result serialization.

Config files are UTF-8 JSON with top-level keys "version" and "branches";
each branch holds "stacks" (objects with "a", "b", "phi"), "i_lb" and
"i_ub". The string "inf" is the one non-numeric bound token and maps to an
unbounded upper limit. Numbers round-trip bit-exactly through serialization.
"""

from __future__ import annotations

import json
import math
from typing import Any, Sequence

from .dispatch import DispatchResult, DispatchStatus
from .stack_model import BranchSpec, Network, SqrtStackParams, validate_network

_INFEASIBLE_MESSAGE = "Required power cannot be obtained"


class ConfigError(ValueError):
    """A config document is malformed or violates a network invariant."""


def _require(obj: dict, key: str, where: str) -> Any:
    if key not in obj:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return obj[key]


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _upper_bound(value: Any, where: str) -> float:
    if value == "inf":
        return math.inf
    return _number(value, where)


def parse_network(text: str) -> Network:
    """Parse and validate a config document, with positional diagnostics."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid JSON at line {err.lineno}, column {err.colno}: {err.msg}") from err
    if not isinstance(doc, dict):
        raise ConfigError("top level must be an object")

    version = _require(doc, "version", "document")
    if not isinstance(version, str):
        raise ConfigError(f"document: version must be a string, got {version!r}")

    raw_branches = _require(doc, "branches", "document")
    if not isinstance(raw_branches, list) or not raw_branches:
        raise ConfigError("document: branches must be a nonempty array")

    branches = []
    for j, raw in enumerate(raw_branches):
        where = f"branches[{j}]"
        if not isinstance(raw, dict):
            raise ConfigError(f"{where}: expected an object")
        raw_stacks = _require(raw, "stacks", where)
        if not isinstance(raw_stacks, list) or not raw_stacks:
            raise ConfigError(f"{where}: stacks must be a nonempty array")
        stacks = []
        for k, raw_stack in enumerate(raw_stacks):
            s_where = f"{where}.stacks[{k}]"
            if not isinstance(raw_stack, dict):
                raise ConfigError(f"{s_where}: expected an object")
            stacks.append(
                SqrtStackParams(
                    a=_number(_require(raw_stack, "a", s_where), f"{s_where}.a"),
                    b=_number(_require(raw_stack, "b", s_where), f"{s_where}.b"),
                    phi=_number(_require(raw_stack, "phi", s_where), f"{s_where}.phi"),
                )
            )
        branches.append(
            BranchSpec(
                stacks=tuple(stacks),
                i_lb=_number(_require(raw, "i_lb", where), f"{where}.i_lb"),
                i_ub=_upper_bound(_require(raw, "i_ub", where), f"{where}.i_ub"),
            )
        )

    network = Network(branches=tuple(branches))
    try:
        return validate_network(network)
    except ValueError as err:
        raise ConfigError(str(err)) from err


def serialize_network(network: Network) -> str:
    """Config text that parses back to the same network bit-exactly."""
    doc = {
        "version": "1",
        "branches": [
            {
                "stacks": [{"a": s.a, "b": s.b, "phi": s.phi} for s in br.stacks],
                "i_lb": br.i_lb,
                "i_ub": "inf" if math.isinf(br.i_ub) else br.i_ub,
            }
            for br in network.branches
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def serialize_result(result: DispatchResult) -> str:
    """Deterministic JSON record for one dispatch (branch numbers 1-based)."""
    doc: dict[str, Any] = {
        "status": result.status.value,
        "p_req": result.p_req,
        "feasible_range": list(result.feasible_range),
    }
    if result.status is DispatchStatus.OPTIMAL:
        doc["currents"] = list(result.currents)
        doc["total_current"] = result.total_current
        doc["total_power"] = result.total_power
        doc["mu"] = result.mu
        doc["active_sets"] = {
            "at_lb": [j + 1 for j in sorted(result.sets.at_lb)],
            "interior": [j + 1 for j in sorted(result.sets.interior)],
            "at_ub": [j + 1 for j in sorted(result.sets.at_ub)],
            "p_req_eff": result.sets.p_req_eff,
        }
    else:
        doc["message"] = _INFEASIBLE_MESSAGE
    return json.dumps(doc, indent=2) + "\n"


def sweep_to_csv(results: Sequence[DispatchResult], n_branches: int) -> str:
    """CSV rows for a demand sweep; infeasible demands keep their row with
    empty current cells so the feasible window stays visible in plots."""
    header = ["p_req"] + [f"i_{j + 1}" for j in range(n_branches)] + ["i_total", "mu", "status"]
    lines = [",".join(header)]
    for res in results:
        if res.status is DispatchStatus.OPTIMAL:
            cells = (
                [repr(res.p_req)]
                + [repr(i) for i in res.currents]
                + [repr(res.total_current), repr(res.mu), res.status.value]
            )
        else:
            cells = [repr(res.p_req)] + [""] * (n_branches + 2) + [res.status.value]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
