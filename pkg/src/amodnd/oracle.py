"""Brute-force references: path enumeration, full path LP, flow decomposition, design enumeration.

Everything here is exponential on purpose and guarded by a node-count limit.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .lp import LpSolution, solve_dense, solve_lp
from .master import OD, Column, Instance, RestrictedMaster, RmpMaps, build_rmp, make_column
from .network import Network, path_edges, within_budget

DEFAULT_GUARD = 14


class GuardExceeded(ValueError):
    pass


class ConservationViolated(ValueError):
    pass


@dataclass(frozen=True)
class PathSetEnumeration:
    od: OD
    paths: tuple[tuple[int, ...], ...]  # node sequences, lexicographic order
    guard: int


def enumerate_admissible_paths(
    net: Network, o: int, d: int, time_limit: float, guard: int = DEFAULT_GUARD
) -> PathSetEnumeration:
    """Every elementary o-d path with total travel time within ``time_limit``."""
    if net.num_nodes > guard:
        raise GuardExceeded(f"{net.num_nodes} nodes exceeds enumeration guard {guard}")
    found = []
    succ = {v: sorted((net.edges[e].dst, net.edges[e].travel_time) for e in net.out_adjacency[v]) for v in range(net.num_nodes)}

    def walk(v, seq, on_path, t):
        if v == d:
            found.append(tuple(seq))
            return
        for w, tt in succ[v]:
            if w in on_path:
                continue
            nt = t + tt
            if not within_budget(nt, time_limit):
                continue
            seq.append(w)
            on_path.add(w)
            walk(w, seq, on_path, nt)
            on_path.discard(w)
            seq.pop()

    if o == d:
        raise ValueError("origin equals destination")
    walk(o, [o], {o}, 0.0)
    found.sort()
    return PathSetEnumeration(od=(o, d), paths=tuple(found), guard=guard)


def all_admissible_columns(inst: Instance, guard: int = DEFAULT_GUARD) -> list[Column]:
    cols = []
    for dem in inst.demands:
        limit = inst.time_limit_table[dem.od]
        for nodes in enumerate_admissible_paths(inst.network, dem.origin, dem.dest, limit, guard).paths:
            cols.append(make_column(inst, dem.od, path_edges(inst.network, nodes)))
    return cols


def solve_full_lp(inst: Instance, guard: int = DEFAULT_GUARD) -> tuple[float, LpSolution, RmpMaps]:
    """LP relaxation of the path model over every admissible path."""
    master = RestrictedMaster(inst, all_admissible_columns(inst, guard))
    lp, maps = build_rmp(inst, master)
    sol = solve_lp(lp)
    return sol.objective_value, sol, maps


def max_reduced_costs(inst: Instance, duals, guard: int = DEFAULT_GUARD) -> dict[OD, float]:
    """Largest reduced cost over all admissible paths, per OD (-inf if none)."""
    best = {dem.od: -math.inf for dem in inst.demands}
    for col in all_admissible_columns(inst, guard):
        best[col.od] = max(best[col.od], duals.column_reduced_cost(col))
    return best


def flow_decompose(
    net: Network, o: int, d: int, edge_flows: Mapping[int, float], value: float, tol: float = 1e-9
) -> tuple[list[tuple[tuple[int, ...], float]], dict[int, float]]:
    """Split one OD's edge flows into o-d path flows plus a cycle residue.

    Returns ``(paths, residue)`` where ``paths`` holds (edge sequence, amount)
    and ``residue`` the leftover edge flow that only circulates.
    """
    flow = {e: float(f) for e, f in edge_flows.items() if f > tol}
    for v in range(net.num_nodes):
        out_f = sum(flow.get(e, 0.0) for e in net.out_adjacency[v])
        in_f = sum(flow.get(e, 0.0) for e in net.in_adjacency[v])
        want = value if v == o else -value if v == d else 0.0
        if abs(out_f - in_f - want) > tol * (1.0 + abs(value)) * 10:
            raise ConservationViolated(f"node {v}: net outflow {out_f - in_f} != {want}")
    paths = []
    residue: dict[int, float] = {}
    remaining = value
    while remaining > tol:
        # walk forward along positive flow, cancelling any cycle met on the way
        seq_nodes = [o]
        seq_edges: list[int] = []
        pos = {o: 0}
        v = o
        while v != d:
            nxt = next((e for e in net.out_adjacency[v] if flow.get(e, 0.0) > tol), None)
            if nxt is None:
                raise ConservationViolated(f"flow stops at node {v}")
            w = net.edges[nxt].dst
            if w in pos:
                k = pos[w]
                cycle = seq_edges[k:] + [nxt]
                amt = min(flow[e] for e in cycle)
                for e in cycle:
                    flow[e] -= amt
                    residue[e] = residue.get(e, 0.0) + amt
                for node in seq_nodes[k + 1 :]:
                    del pos[node]
                seq_nodes = seq_nodes[: k + 1]
                seq_edges = seq_edges[:k]
                v = w
                continue
            seq_edges.append(nxt)
            seq_nodes.append(w)
            pos[w] = len(seq_nodes) - 1
            v = w
        amt = min(min(flow[e] for e in seq_edges), remaining)
        for e in seq_edges:
            flow[e] -= amt
        remaining -= amt
        paths.append((tuple(seq_edges), amt))
    for e, f in flow.items():
        if f > tol:
            residue[e] = residue.get(e, 0.0) + f
    return paths, {e: f for e, f in residue.items() if f > tol}


def enumerate_designs(
    inst: Instance, columns: list[Column], max_edges: int = 12
) -> tuple[float, dict[int, int]]:
    """Best integer design over ``columns`` by scoring every 0/1 edge pattern with an LP."""
    net = inst.network
    if net.num_edges > max_edges:
        raise GuardExceeded(f"{net.num_edges} edges exceeds design enumeration guard {max_edges}")
    lp, maps = build_rmp(inst, columns)
    c, A, b, lo, up = lp.dense()
    cost = np.array([e.build_cost for e in net.edges])
    best, best_x = -math.inf, None
    for pattern in itertools.product((0.0, 1.0), repeat=net.num_edges):
        x = np.array(pattern)
        if cost @ x > inst.budget * (1 + 1e-12) + 1e-9:
            continue
        plo, pup = lo.copy(), up.copy()
        xv = [maps.x_var[e.id] for e in net.edges]
        plo[xv] = x
        pup[xv] = x
        sol = solve_dense(c, A, b, plo, pup)
        if sol.optimal and sol.objective_value > best:
            best, best_x = sol.objective_value, {i: int(v) for i, v in enumerate(pattern)}
    return best, best_x
