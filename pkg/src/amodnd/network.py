"""Road-graph model, shortest-path primitives and OD-specific pruning."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

# Stands in for +inf distances; larger than any finite sum of edge times we build.
UNREACHABLE = math.inf

# Shared slack for every "time <= budget" comparison so pruning, pricing and the
# enumeration oracle agree on boundary cases.
TIME_RTOL = 1e-12
TIME_ATOL = 1e-9


class NetworkError(ValueError):
    pass


class DuplicateEdge(NetworkError):
    pass


class NonPositiveAttribute(NetworkError):
    pass


class DanglingEndpoint(NetworkError):
    pass


class UnknownNode(NetworkError):
    pass


class NonIncidentEdges(NetworkError):
    pass


class Infeasible(Exception):
    """No o-d path meets the travel-time limit."""


def within_budget(time: float, budget: float) -> bool:
    if budget == UNREACHABLE:
        return time < UNREACHABLE
    return time <= budget * (1.0 + TIME_RTOL) + TIME_ATOL


@dataclass(frozen=True)
class Node:
    id: int
    lat: float = 0.0
    lon: float = 0.0


@dataclass(frozen=True)
class Edge:
    id: int
    src: int
    dst: int
    travel_time: float
    length: float
    capacity: float
    build_cost: float
    profit_rate: float = 0.0


@dataclass(frozen=True)
class Network:
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    out_adjacency: tuple[tuple[int, ...], ...]
    in_adjacency: tuple[tuple[int, ...], ...]
    _edge_by_pair: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def edge(self, src: int, dst: int) -> Edge | None:
        eid = self._edge_by_pair.get((src, dst))
        return None if eid is None else self.edges[eid]

    def with_edges(self, edges: Sequence[Edge]) -> "Network":
        """Rebuild with replaced edge attributes (same ids and endpoints)."""
        return build_network(self.nodes, edges)


def build_network(nodes: Iterable[Node], edges: Iterable[Edge]) -> Network:
    nodes = tuple(sorted(nodes, key=lambda n: n.id))
    edges = tuple(sorted(edges, key=lambda e: e.id))
    if not nodes:
        raise NetworkError("network has no nodes")
    for i, node in enumerate(nodes):
        if node.id != i:
            raise NetworkError(f"node ids must be contiguous from 0; got {node.id} at position {i}")
        if not (math.isfinite(node.lat) and math.isfinite(node.lon)):
            raise NetworkError(f"node {node.id} has non-finite coordinates")
    n = len(nodes)
    out_adj: list[list[int]] = [[] for _ in range(n)]
    in_adj: list[list[int]] = [[] for _ in range(n)]
    by_pair: dict[tuple[int, int], int] = {}
    for i, e in enumerate(edges):
        if e.id != i:
            raise NetworkError(f"edge ids must be contiguous from 0; got {e.id} at position {i}")
        if not (0 <= e.src < n and 0 <= e.dst < n):
            raise DanglingEndpoint(f"edge {e.id} references unknown node ({e.src}->{e.dst})")
        if e.src == e.dst:
            raise NetworkError(f"edge {e.id} is a self-loop at node {e.src}")
        for name in ("travel_time", "length", "capacity", "build_cost"):
            value = getattr(e, name)
            if not value > 0 or not math.isfinite(value):
                raise NonPositiveAttribute(f"edge {e.id}: {name}={value!r} must be finite and > 0")
        if not math.isfinite(e.profit_rate):
            raise NetworkError(f"edge {e.id}: profit_rate must be finite")
        if (e.src, e.dst) in by_pair:
            raise DuplicateEdge(
                f"edges {by_pair[(e.src, e.dst)]} and {e.id} both connect {e.src}->{e.dst}"
            )
        by_pair[(e.src, e.dst)] = e.id
        out_adj[e.src].append(e.id)
        in_adj[e.dst].append(e.id)
    return Network(
        nodes=nodes,
        edges=edges,
        out_adjacency=tuple(tuple(a) for a in out_adj),
        in_adjacency=tuple(tuple(a) for a in in_adj),
        _edge_by_pair=by_pair,
    )


def reverse_graph(net: Network) -> Network:
    flipped = [replace(e, src=e.dst, dst=e.src) for e in net.edges]
    return build_network(net.nodes, flipped)


def _dijkstra_tree(net: Network, source: int) -> tuple[list[float], list[int]]:
    if not 0 <= source < net.num_nodes:
        raise UnknownNode(source)
    dist = [UNREACHABLE] * net.num_nodes
    pred = [-1] * net.num_nodes
    dist[source] = 0.0
    done = [False] * net.num_nodes
    # Heap entries (distance, node): equal distances settle the smaller id first.
    heap = [(0.0, source)]
    while heap:
        d, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        for eid in net.out_adjacency[v]:
            e = net.edges[eid]
            nd = d + e.travel_time
            w = e.dst
            if nd < dist[w]:
                dist[w] = nd
                pred[w] = eid
                heapq.heappush(heap, (nd, w))
            elif nd == dist[w] and not done[w] and v < net.edges[pred[w]].src:
                pred[w] = eid
    return dist, pred


def dijkstra(net: Network, source: int) -> list[float]:
    """Shortest travel time from ``source`` to every node (``UNREACHABLE`` if none)."""
    return _dijkstra_tree(net, source)[0]


def shortest_path_edges(net: Network, o: int, d: int) -> tuple[int, ...] | None:
    """Travel-time shortest o-d path as an edge sequence, or None if unreachable."""
    dist, pred = _dijkstra_tree(net, o)
    if dist[d] == UNREACHABLE:
        return None
    edges = []
    v = d
    while v != o:
        eid = pred[v]
        edges.append(eid)
        v = net.edges[eid].src
    return tuple(reversed(edges))


@dataclass(frozen=True)
class PreprocessResult:
    od: tuple[int, int]
    kept_nodes: frozenset[int]
    kept_edges: frozenset[int]
    dist_from_o: tuple[float, ...]
    dist_to_d: tuple[float, ...]
    time_limit: float

    @property
    def shortest_time(self) -> float:
        return self.dist_from_o[self.od[1]]


def preprocess_od(
    net: Network, o: int, d: int, time_limit: float, reverse: Network | None = None
) -> PreprocessResult:
    """Drop every node that cannot lie on an o-d path within ``time_limit``.

    ``reverse`` may be passed to reuse a reversed graph across OD pairs.
    Raises Infeasible when even the fastest o-d path exceeds the limit.
    """
    if not time_limit > 0:
        raise ValueError(f"time limit must be positive, got {time_limit}")
    for v in (o, d):
        if not 0 <= v < net.num_nodes:
            raise UnknownNode(v)
    if reverse is None:
        reverse = reverse_graph(net)
    t_o = dijkstra(net, o)
    t_d = dijkstra(reverse, d)
    if not within_budget(t_o[d], time_limit):
        raise Infeasible(f"OD ({o},{d}): shortest time {t_o[d]} exceeds limit {time_limit}")
    kept = frozenset(
        v
        for v in range(net.num_nodes)
        if t_o[v] < UNREACHABLE and t_d[v] < UNREACHABLE and within_budget(t_o[v] + t_d[v], time_limit)
    )
    kept_edges = frozenset(e.id for e in net.edges if e.src in kept and e.dst in kept)
    return PreprocessResult(
        od=(o, d),
        kept_nodes=kept,
        kept_edges=kept_edges,
        dist_from_o=tuple(t_o),
        dist_to_d=tuple(t_d),
        time_limit=time_limit,
    )


# --- turn geometry ---------------------------------------------------------

DEFAULT_LEFT_BAND = (30.0, 150.0)
_EARTH_RADIUS_M = 6_371_000.0


def _heading(net: Network, e: Edge) -> tuple[float, float]:
    a, b = net.nodes[e.src], net.nodes[e.dst]
    lat_mid = math.radians(0.5 * (a.lat + b.lat))
    dx = math.radians(b.lon - a.lon) * math.cos(lat_mid) * _EARTH_RADIUS_M
    dy = math.radians(b.lat - a.lat) * _EARTH_RADIUS_M
    return dx, dy


def turn_angle(net: Network, e_in: int, e_out: int) -> float:
    """Signed turn angle in degrees, counterclockwise positive, in (-180, 180]."""
    ein, eout = net.edges[e_in], net.edges[e_out]
    if ein.dst != eout.src:
        raise NonIncidentEdges(f"edge {e_in} ends at {ein.dst}, edge {e_out} starts at {eout.src}")
    x1, y1 = _heading(net, ein)
    x2, y2 = _heading(net, eout)
    if (x1 == 0.0 and y1 == 0.0) or (x2 == 0.0 and y2 == 0.0):
        return 0.0
    theta = math.degrees(math.atan2(x1 * y2 - y1 * x2, x1 * x2 + y1 * y2))
    return 180.0 if theta <= -180.0 else theta


def turn_type(
    net: Network, e_in: int, e_out: int, band: tuple[float, float] = DEFAULT_LEFT_BAND
) -> str:
    """Classify the maneuver from ``e_in`` onto ``e_out``.

    Left turns are angles in ``(band[0], band[1]]``, right turns the mirror image,
    anything sharper than ``band[1]`` is a U-turn.
    """
    lo, hi = band
    theta = turn_angle(net, e_in, e_out)
    if abs(theta) > hi:
        return "u_turn"
    if theta > lo:
        return "left"
    if theta < -lo:
        return "right"
    return "straight"


def left_turn_table(
    net: Network, band: tuple[float, float] = DEFAULT_LEFT_BAND
) -> dict[int, frozenset[int]]:
    """Map each incoming edge id to the outgoing edge ids that form a left turn with it."""
    table = {}
    for ein in net.edges:
        lefts = frozenset(
            eout for eout in net.out_adjacency[ein.dst] if turn_type(net, ein.id, eout, band) == "left"
        )
        if lefts:
            table[ein.id] = lefts
    return table


# --- path helpers ----------------------------------------------------------

def path_nodes(net: Network, edges: Sequence[int]) -> tuple[int, ...]:
    if not edges:
        return ()
    nodes = [net.edges[edges[0]].src]
    for eid in edges:
        e = net.edges[eid]
        if e.src != nodes[-1]:
            raise NonIncidentEdges(f"edge {eid} does not continue the path at node {nodes[-1]}")
        nodes.append(e.dst)
    return tuple(nodes)


def path_edges(net: Network, nodes: Sequence[int]) -> tuple[int, ...]:
    out = []
    for a, b in zip(nodes, nodes[1:]):
        e = net.edge(a, b)
        if e is None:
            raise NetworkError(f"no edge {a}->{b}")
        out.append(e.id)
    return tuple(out)


# Plain left-to-right sums: identical to what label extension accumulates.
def path_time(net: Network, edges: Sequence[int]) -> float:
    t = 0.0
    for e in edges:
        t += net.edges[e].travel_time
    return t


def path_profit(net: Network, edges: Sequence[int]) -> float:
    b = 0.0
    for e in edges:
        b += net.edges[e].profit_rate
    return b


def count_left_turns(edges: Sequence[int], lefts: dict[int, frozenset[int]]) -> int:
    return sum(1 for a, b in zip(edges, edges[1:]) if b in lefts.get(a, ()))


def is_elementary(nodes: Sequence[int]) -> bool:
    return len(set(nodes)) == len(nodes)
