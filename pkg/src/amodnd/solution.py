"""Solution documents (the JSON written by ``solve``) and independent validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

from .colgen import CgResult
from .io import json_number, parse_number
from .master import Instance
from .network import count_left_turns, is_elementary, path_edges, within_budget

FORMAT = "amodnd-solution/1"
FLOW_TOL = 1e-12


def edge_flows(inst: Instance, paths: list[dict]) -> dict[int, float]:
    y: dict[int, float] = {}
    for p in paths:
        for eid in p["edges"]:
            y[eid] = y.get(eid, 0.0) + p["flow"]
    return y


def solution_document(result: CgResult, config: Mapping[str, Any] | None = None) -> dict:
    """Everything needed to reproduce and check a design; no wall-clock data."""
    inst = result.instance
    net = inst.network
    x = result.x_ip
    paths = []
    for col, f in zip(result.ip_maps.columns, result.f_ip):
        if f <= FLOW_TOL:
            continue
        paths.append(
            {
                "od": list(col.od),
                "nodes": list(col.nodes),
                "edges": list(col.edges),
                "flow": f,
                "time": col.time,
                "profit": col.profit,
                "left_turns": col.left_turns,
            }
        )
    y = edge_flows(inst, paths)
    instrumented = sorted(eid for eid, v in x.items() if v == 1)
    usage = {
        "budget": math.fsum(net.edges[eid].build_cost for eid in instrumented),
        "fleet_time": math.fsum(p["time"] * p["flow"] for p in paths),
        "left_turns": math.fsum(p["left_turns"] * p["flow"] for p in paths),
        "served": math.fsum(p["flow"] for p in paths),
    }
    return {
        "format": FORMAT,
        "status": result.ip_solution.status,
        "J_LP": result.J_LP,
        "J_IP": result.J_IP,
        "gap": result.gap,
        "mip_bound": json_number(result.ip_solution.bound),
        "mip_nodes": result.ip_solution.nodes,
        "instrumented_edges": [
            {"edge": eid, "src": net.edges[eid].src, "dst": net.edges[eid].dst} for eid in instrumented
        ],
        "paths": paths,
        "edge_flows": [{"edge": eid, "y": y[eid]} for eid in sorted(y)],
        "usage": usage,
        "limits": {
            "budget": inst.budget,
            "fleet_time": inst.fleet_time,
            "left_turns": json_number(inst.left_turn_budget if inst.has_left_turn_row else math.inf),
        },
        "column_generation": {
            "iterations": result.iterations,
            "converged": result.converged,
            "columns": len(result.master),
            "log": [
                {
                    "iteration": r.iteration,
                    "objective": r.objective,
                    "columns_added": r.columns_added,
                    "max_reduced_cost": json_number(r.max_reduced_cost),
                }
                for r in result.log
            ],
        },
        "dropped_ods": [list(od) for od in result.dropped],
        "config": dict(config or {}),
    }


@dataclass
class CheckResult:
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    checks: dict[str, CheckResult] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def add(self, name: str, failures: list[str]) -> None:
        self.checks[name] = CheckResult(not failures, "; ".join(failures[:5]))

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": {k: {"passed": v.passed, "detail": v.detail} for k, v in self.checks.items()},
        }


def _over(value: float, limit: float, tol: float) -> bool:
    return value > limit + tol * max(1.0, abs(limit))


def validate_solution(inst: Instance, doc: Mapping[str, Any], tol: float = 1e-7) -> ValidationReport:
    """Recompute every constraint family of the design model from the raw document."""
    net = inst.network
    report = ValidationReport()
    x = {int(item["edge"]): 1 for item in doc.get("instrumented_edges", [])}
    paths = doc.get("paths", [])

    bad = []
    limits = inst.time_limit_table
    for k, p in enumerate(paths):
        od = tuple(p["od"])
        nodes = list(p["nodes"])
        if od not in limits:
            bad.append(f"path {k}: OD {od} has no demand")
            continue
        if p["flow"] < -tol:
            bad.append(f"path {k}: negative flow {p['flow']}")
        if not nodes or nodes[0] != od[0] or nodes[-1] != od[1]:
            bad.append(f"path {k}: does not run from {od[0]} to {od[1]}")
            continue
        if not is_elementary(nodes):
            bad.append(f"path {k}: repeats a node")
            continue
        try:
            edges = path_edges(net, nodes)
        except ValueError as exc:
            bad.append(f"path {k}: {exc}")
            continue
        if list(edges) != list(p["edges"]):
            bad.append(f"path {k}: edge list does not match node sequence")
        t = sum(net.edges[e].travel_time for e in edges)
        if not within_budget(t, limits[od]):
            bad.append(f"path {k}: time {t:.6g} exceeds limit {limits[od]:.6g}")
    report.add("paths", bad)
    if bad:
        return report

    served: dict = {}
    for p in paths:
        served[tuple(p["od"])] = served.get(tuple(p["od"]), 0.0) + p["flow"]
    report.add(
        "demand",
        [f"OD {od}: flow {f:.9g} > alpha {inst.demand(od).alpha:.9g}" for od, f in served.items() if _over(f, inst.demand(od).alpha, tol)],
    )

    y = edge_flows(inst, paths)
    report.add(
        "capacity",
        [
            f"edge {eid}: y={f:.9g} > c*x={net.edges[eid].capacity * x.get(eid, 0):.9g}"
            for eid, f in sorted(y.items())
            if _over(f, net.edges[eid].capacity * x.get(eid, 0), tol)
        ],
    )
    reported_y = {int(item["edge"]): float(item["y"]) for item in doc.get("edge_flows", [])}
    report.add(
        "edge_flows",
        [
            f"edge {eid}: reported y={reported_y.get(eid, 0.0):.12g}, recomputed {y.get(eid, 0.0):.12g}"
            for eid in sorted(set(y) | set(reported_y))
            if abs(reported_y.get(eid, 0.0) - y.get(eid, 0.0)) > 1e-9 * max(1.0, abs(y.get(eid, 0.0)))
        ],
    )

    spent = math.fsum(net.edges[eid].build_cost for eid in x)
    report.add("budget", [f"spent {spent:.9g} > B {inst.budget:.9g}"] if _over(spent, inst.budget, tol) else [])
    fleet = math.fsum(sum(net.edges[e].travel_time for e in p["edges"]) * p["flow"] for p in paths)
    report.add("fleet_time", [f"used {fleet:.9g} > R {inst.fleet_time:.9g}"] if _over(fleet, inst.fleet_time, tol) else [])
    lefts = math.fsum(count_left_turns(p["edges"], inst.left_turns) * p["flow"] for p in paths)
    lt_fail = []
    if inst.has_left_turn_row and _over(lefts, inst.left_turn_budget, tol):
        lt_fail.append(f"left turns {lefts:.9g} > LT {inst.left_turn_budget:.9g}")
    report.add("left_turns", lt_fail)

    profit = math.fsum(sum(net.edges[e].profit_rate for e in p["edges"]) * p["flow"] for p in paths)
    j_ip = parse_number(doc.get("J_IP", math.nan))
    report.add(
        "objective",
        [] if abs(profit - j_ip) <= tol * max(1.0, abs(j_ip)) else [f"recomputed profit {profit:.12g} != J_IP {j_ip:.12g}"],
    )

    usage = doc.get("usage", {})
    mismatches = []
    for name, value in (("budget", spent), ("fleet_time", fleet), ("left_turns", lefts)):
        if name in usage and abs(float(usage[name]) - value) > 1e-9 * max(1.0, abs(value)):
            mismatches.append(f"reported {name} {usage[name]!r} != recomputed {value!r}")
    report.add("usage", mismatches)
    return report
