"""Exact elementary shortest path with a travel-time resource (label correcting)."""

from __future__ import annotations

import heapq
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Mapping

from .network import TIME_ATOL, TIME_RTOL, Edge, Network, PreprocessResult, within_budget


class NodesDiffer(ValueError):
    pass


def edge_pricing_cost(e: Edge, mu: float, u_e: float) -> float:
    return mu * e.travel_time + u_e - e.profit_rate


def reduced_cost(
    profit: float,
    sum_u: float,
    v_od: float,
    mu: float,
    time: float,
    omega: float = 0.0,
    left_turns: int = 0,
) -> float:
    """Reduced cost of a path column given its aggregates and the master duals."""
    return profit - sum_u - v_od - mu * time - omega * left_turns


@dataclass(slots=True, eq=False)
class Label:
    node: int
    cost: float
    time: float
    visited: int
    parent: "Label | None" = None
    edge: int | None = None
    dead: bool = False

    def edges(self) -> tuple[int, ...]:
        out = []
        lab = self
        while lab.edge is not None:
            out.append(lab.edge)
            lab = lab.parent
        return tuple(reversed(out))

    def nodes(self) -> tuple[int, ...]:
        out = []
        lab = self
        while lab is not None:
            out.append(lab.node)
            lab = lab.parent
        return tuple(reversed(out))


def dominates(l1: Label, l2: Label, slack: float = 0.0) -> bool:
    """Whether ``l1`` dominates ``l2`` at their common node.

    With ``slack`` > 0 the time test is relaxed to ``t1 - t2 <= slack``.
    """
    if l1.node != l2.node:
        raise NodesDiffer(f"labels at {l1.node} and {l2.node} are not comparable")
    if l1.cost > l2.cost:
        return False
    dt = l1.time - l2.time
    if dt > slack:
        return False
    v1, v2 = l1.visited, l2.visited
    if v1 & ~v2:
        return False
    return l1.cost < l2.cost or dt < slack or v1 != v2


@dataclass(frozen=True)
class ReachTable:
    """For each kept node v, the kept nodes w sorted by t(v, w) + t(w, d).

    A label at v with elapsed time t can never use a node w whose bound
    exceeds M - t, so w may be treated as already visited. This only makes
    dominance stronger; no feasible completion is lost.
    """

    local: dict[int, int]
    keys: dict[int, list[float]]
    suffix: dict[int, list[int]]
    time_limit: float

    def closed(self, v: int, elapsed: float) -> int:
        if self.time_limit == math.inf:
            return self.suffix[v][bisect_right(self.keys[v], math.inf)]
        # a small extra margin keeps rounding from closing a node that is just reachable
        limit = self.time_limit * (1.0 + TIME_RTOL) + TIME_ATOL + 1e-9 * max(1.0, self.time_limit)
        return self.suffix[v][bisect_right(self.keys[v], limit - elapsed)]


def build_reach_table(net: Network, pre: PreprocessResult) -> ReachTable:
    kept = sorted(pre.kept_nodes)
    local = {v: i for i, v in enumerate(kept)}
    out = {v: [net.edges[e] for e in net.out_adjacency[v] if e in pre.kept_edges] for v in kept}
    keys, suffix = {}, {}
    for v in kept:
        dist = {v: 0.0}
        heap = [(0.0, v)]
        done = set()
        while heap:
            dv, a = heapq.heappop(heap)
            if a in done:
                continue
            done.add(a)
            for e in out[a]:
                nd = dv + e.travel_time
                if nd < dist.get(e.dst, math.inf):
                    dist[e.dst] = nd
                    heapq.heappush(heap, (nd, e.dst))
        entries = sorted((dist.get(w, math.inf) + pre.dist_to_d[w], local[w]) for w in kept if w != v)
        acc = [0] * (len(entries) + 1)
        for k in range(len(entries) - 1, -1, -1):
            acc[k] = acc[k + 1] | (1 << entries[k][1])
        keys[v] = [lb for lb, _ in entries]
        suffix[v] = acc
    return ReachTable(local, keys, suffix, pre.time_limit)


@dataclass(frozen=True)
class PricingContext:
    network: Network
    od: tuple[int, int]
    time_limit: float
    bounds: tuple[float, ...]
    edge_cost: tuple[float, ...]
    turn_cost: float = 0.0
    left_turns: Mapping[int, frozenset[int]] = field(default_factory=dict)
    robust_slack: float = 0.0
    reach: ReachTable | None = None


@dataclass(frozen=True)
class PricedPath:
    path: tuple[int, ...]
    nodes: tuple[int, ...]
    cost: float
    time: float

    def reduced_cost(self, v_od: float) -> float:
        return -self.cost - v_od


def extend_label(label: Label, e: Edge, ctx: PricingContext, bit: int) -> Label | None:
    """Extend ``label`` along ``e``; None when the child is non-elementary or cannot finish in time.

    ``bit`` is the visited-set bit of ``e.dst``.
    """
    if label.visited & bit:
        return None
    t = label.time + e.travel_time
    if not within_budget(t + ctx.bounds[e.dst], ctx.time_limit):
        return None
    c = label.cost + ctx.edge_cost[e.id]
    if ctx.turn_cost and label.edge is not None and e.id in ctx.left_turns.get(label.edge, ()):
        c += ctx.turn_cost
    return Label(e.dst, c, t, label.visited | bit, label, e.id)


def _sort_key(label: Label):
    return (label.cost, label.time, label.nodes())


def solve_sprc(
    ctx: PricingContext,
    pre: PreprocessResult,
    *,
    dominance: bool = True,
    pareto: bool = False,
    strengthen: bool = True,
) -> PricedPath | list[PricedPath] | None:
    """Minimum-cost elementary o-d path with travel time within ``ctx.time_limit``.

    Runs on the nodes and edges kept by ``pre``. With ``pareto`` the whole
    non-dominated set reaching the destination is returned, best first.
    ``strengthen`` marks nodes that can no longer be reached in time as visited.
    """
    net = ctx.network
    o, d = ctx.od
    if o not in pre.kept_nodes or d not in pre.kept_nodes:
        return [] if pareto else None
    local = {v: i for i, v in enumerate(sorted(pre.kept_nodes))}
    reach = None
    if strengthen:
        reach = ctx.reach if ctx.reach is not None else build_reach_table(net, pre)
    kept_edges = pre.kept_edges
    out_edges = {
        v: [net.edges[eid] for eid in net.out_adjacency[v] if eid in kept_edges] for v in pre.kept_nodes
    }
    slack = ctx.robust_slack
    turn_aware = ctx.turn_cost != 0.0
    # With a turn penalty the future cost depends on the incoming edge, so
    # labels only compete with others that arrived over the same edge.
    bags: dict = {}

    def bag_key(lab: Label):
        return (lab.node, lab.edge) if turn_aware else lab.node

    start = Label(o, 0.0, 0.0, 1 << local[o])
    if reach is not None:
        start.visited |= reach.closed(o, 0.0)
    bags[bag_key(start)] = [start]
    queue = [(ctx.bounds[o], 0, start)]
    counter = 1
    while queue:
        _, _, lab = heapq.heappop(queue)
        if lab.dead:
            continue
        for e in out_edges[lab.node]:
            child = extend_label(lab, e, ctx, 1 << local[e.dst])
            if child is None:
                continue
            if reach is not None:
                child.visited |= reach.closed(child.node, child.time)
            key = bag_key(child)
            bag = bags.get(key)
            if bag is None:
                bags[key] = [child]
            elif dominance:
                # an exact copy has exactly the same completions: keep the first
                if any(
                    dominates(other, child, slack)
                    or (other.cost == child.cost and other.time == child.time and other.visited == child.visited)
                    for other in bag
                ):
                    continue
                survivors = []
                for other in bag:
                    if dominates(child, other, slack):
                        other.dead = True
                    else:
                        survivors.append(other)
                survivors.append(child)
                bags[key] = survivors
            else:
                bag.append(child)
            if child.node != d:
                heapq.heappush(queue, (child.time + ctx.bounds[child.node], counter, child))
                counter += 1

    at_d = [lab for key, bag in bags.items() if (key[0] if turn_aware else key) == d for lab in bag]
    if not at_d:
        return [] if pareto else None
    at_d.sort(key=_sort_key)
    priced = [PricedPath(lab.edges(), lab.nodes(), lab.cost, lab.time) for lab in at_d]
    return priced if pareto else priced[0]
