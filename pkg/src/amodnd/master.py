"""Problem instance, restricted master LP, dual mapping and robust counterparts."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from .lp import LinearProgram, LpSolution
from .network import (
    DEFAULT_LEFT_BAND,
    UNREACHABLE,
    Network,
    count_left_turns,
    dijkstra,
    is_elementary,
    left_turn_table,
    path_nodes,
    path_profit,
    path_time,
    within_budget,
)

logger = logging.getLogger(__name__)

OD = tuple[int, int]

DEFAULT_DETOUR_FACTOR = 1.5


class InadmissiblePath(ValueError):
    pass


class NotOptimal(ValueError):
    pass


class PathConstraintsActive(ValueError):
    pass


@dataclass(frozen=True)
class Demand:
    origin: int
    dest: int
    alpha: float

    def __post_init__(self):
        if self.origin == self.dest:
            raise ValueError(f"demand {self.origin}->{self.dest}: origin equals destination")
        if not self.alpha > 0 or not math.isfinite(self.alpha):
            raise ValueError(f"demand {self.origin}->{self.dest}: alpha must be positive, got {self.alpha}")

    @property
    def od(self) -> OD:
        return (self.origin, self.dest)


@dataclass(frozen=True)
class Instance:
    network: Network
    demands: tuple[Demand, ...]
    budget: float
    fleet_time: float
    time_limits: Mapping[OD, float] | None = None
    detour_factor: float = DEFAULT_DETOUR_FACTOR
    left_turn_budget: float | None = None
    turn_band: tuple[float, float] = DEFAULT_LEFT_BAND

    def __post_init__(self):
        object.__setattr__(self, "demands", tuple(self.demands))
        if self.budget < 0 or self.fleet_time < 0:
            raise ValueError("budget and fleet time must be nonnegative")
        if not self.detour_factor >= 1.0:
            raise ValueError(f"detour factor must be >= 1, got {self.detour_factor}")
        if self.left_turn_budget is not None and self.left_turn_budget < 0:
            raise ValueError("left-turn budget must be nonnegative")
        seen = set()
        for dem in self.demands:
            if dem.od in seen:
                raise ValueError(f"duplicate demand for OD {dem.od}")
            seen.add(dem.od)
            for v in dem.od:
                if not 0 <= v < self.network.num_nodes:
                    raise ValueError(f"demand {dem.od} references unknown node {v}")

    @property
    def has_left_turn_row(self) -> bool:
        return self.left_turn_budget is not None and math.isfinite(self.left_turn_budget)

    @cached_property
    def time_limit_table(self) -> dict[OD, float]:
        """M_od for every demand: the explicit table, else detour factor times shortest time."""
        explicit = dict(self.time_limits or {})
        limits: dict[OD, float] = {}
        shortest_from: dict[int, list[float]] = {}
        for dem in self.demands:
            if dem.od in explicit:
                limits[dem.od] = float(explicit[dem.od])
                continue
            if self.detour_factor == math.inf:
                limits[dem.od] = math.inf
                continue
            if dem.origin not in shortest_from:
                shortest_from[dem.origin] = dijkstra(self.network, dem.origin)
            t = shortest_from[dem.origin][dem.dest]
            limits[dem.od] = self.detour_factor * t if t < UNREACHABLE else UNREACHABLE
        return limits

    @cached_property
    def left_turns(self) -> dict[int, frozenset[int]]:
        return left_turn_table(self.network, self.turn_band)

    def demand(self, od: OD) -> Demand:
        for dem in self.demands:
            if dem.od == od:
                return dem
        raise KeyError(od)


@dataclass(frozen=True)
class Column:
    od: OD
    edges: tuple[int, ...]
    nodes: tuple[int, ...]
    time: float
    profit: float
    left_turns: int


def make_column(inst: Instance, od: OD, edges: Sequence[int]) -> Column:
    edges = tuple(edges)
    nodes = path_nodes(inst.network, edges)
    if not edges or nodes[0] != od[0] or nodes[-1] != od[1]:
        raise InadmissiblePath(f"path {nodes} does not connect OD {od}")
    return Column(
        od=od,
        edges=edges,
        nodes=nodes,
        time=path_time(inst.network, edges),
        profit=path_profit(inst.network, edges),
        left_turns=count_left_turns(edges, inst.left_turns),
    )


def check_admissible(inst: Instance, col: Column) -> None:
    if not is_elementary(col.nodes):
        raise InadmissiblePath(f"path {col.nodes} for OD {col.od} is not elementary")
    limit = inst.time_limit_table.get(col.od)
    if limit is None:
        raise InadmissiblePath(f"OD {col.od} has no demand")
    if not within_budget(col.time, limit):
        raise InadmissiblePath(f"path {col.nodes} takes {col.time} > limit {limit} for OD {col.od}")


class RestrictedMaster:
    """The path store P^r, grouped by OD in demand order."""

    def __init__(self, inst: Instance, columns: Iterable[Column] = ()):
        self.instance = inst
        self.columns: dict[OD, list[Column]] = {dem.od: [] for dem in inst.demands}
        self._keys: set[tuple[int, ...]] = set()
        for col in columns:
            self.add(col)

    def add(self, col: Column) -> bool:
        """Insert a column; False if the same node sequence is already stored."""
        check_admissible(self.instance, col)
        if col.nodes in self._keys:
            return False
        self._keys.add(col.nodes)
        self.columns[col.od].append(col)
        return True

    def __contains__(self, col: Column) -> bool:
        return col.nodes in self._keys

    def __len__(self) -> int:
        return len(self._keys)

    def ordered(self) -> list[Column]:
        return [col for dem in self.instance.demands for col in self.columns[dem.od]]


@dataclass
class RmpMaps:
    x_var: dict[int, int]  # edge id -> LP variable
    path_vars: list[int]
    columns: list[Column]
    demand_row: dict[OD, int]
    capacity_row: dict[int, int]  # edge id -> LP row
    budget_row: int
    fleet_row: int
    left_turn_row: int | None
    num_edges: int
    link_row: dict[tuple[OD, int], int] = field(default_factory=dict)


def build_rmp(
    inst: Instance,
    master: RestrictedMaster | Iterable[Column],
    edges: Iterable[int] | None = None,
    linking: bool = False,
) -> tuple[LinearProgram, RmpMaps]:
    """Restricted master LP: x in [0,1] per edge, one flow variable per stored path.

    ``edges`` limits the design variables and capacity rows to a subset; the
    stored columns must only use edges from it. ``linking`` appends, for every
    OD and edge its paths use, the row  Σ f ≤ min(α_od, c_e) x_e.  Integer
    designs satisfy these rows anyway; they only tighten the relaxation.
    """
    if not isinstance(master, RestrictedMaster):
        master = RestrictedMaster(inst, master)
    net = inst.network
    columns = master.ordered()
    design = [net.edges[eid] for eid in sorted(set(edges))] if edges is not None else list(net.edges)
    lp = LinearProgram()
    x_var = {e.id: lp.add_variable(0.0, 0.0, 1.0, name=f"x[{e.id}]") for e in design}
    path_vars = [
        lp.add_variable(col.profit, 0.0, math.inf, name=f"f[{'-'.join(map(str, col.nodes))}]") for col in columns
    ]
    demand_row = {}
    for dem in inst.demands:
        coeffs = {pv: 1.0 for pv, col in zip(path_vars, columns) if col.od == dem.od}
        demand_row[dem.od] = lp.add_row(coeffs, dem.alpha, name=f"demand[{dem.origin},{dem.dest}]")
    users: list[list[int]] = [[] for _ in net.edges]
    for pv, col in zip(path_vars, columns):
        for eid in col.edges:
            if eid not in x_var:
                raise ValueError(f"column {col.nodes} uses edge {eid} outside the design subset")
            users[eid].append(pv)
    capacity_row = {}
    for e in design:
        coeffs = {pv: 1.0 for pv in users[e.id]}
        coeffs[x_var[e.id]] = -e.capacity
        capacity_row[e.id] = lp.add_row(coeffs, 0.0, name=f"capacity[{e.id}]")
    budget_row = lp.add_row({x_var[e.id]: e.build_cost for e in design}, inst.budget, name="budget")
    fleet_row = lp.add_row({pv: col.time for pv, col in zip(path_vars, columns)}, inst.fleet_time, name="fleet_time")
    lt_row = None
    if inst.has_left_turn_row:
        lt_row = lp.add_row(
            {pv: float(col.left_turns) for pv, col in zip(path_vars, columns)},
            inst.left_turn_budget,
            name="left_turns",
        )
    link_row: dict[tuple[OD, int], int] = {}
    if linking:
        groups: dict[tuple[OD, int], list[int]] = {}
        for pv, col in zip(path_vars, columns):
            for eid in col.edges:
                groups.setdefault((col.od, eid), []).append(pv)
        for (od, eid), pvs in sorted(groups.items()):
            coeffs = {pv: 1.0 for pv in pvs}
            coeffs[x_var[eid]] = -min(inst.demand(od).alpha, net.edges[eid].capacity)
            link_row[(od, eid)] = lp.add_row(coeffs, 0.0, name=f"link[{od[0]},{od[1]},{eid}]")
    return lp, RmpMaps(
        x_var, path_vars, columns, demand_row, capacity_row, budget_row, fleet_row, lt_row, net.num_edges, link_row
    )


@dataclass(frozen=True)
class Duals:
    v: dict[OD, float]
    u: tuple[float, ...]
    pi: float
    mu: float
    omega: float | None
    delta: tuple[float, ...]

    @property
    def turn_cost(self) -> float:
        return self.omega or 0.0

    def dual_objective(self, inst: Instance) -> float:
        total = sum(self.v[dem.od] * dem.alpha for dem in inst.demands)
        total += inst.budget * self.pi + inst.fleet_time * self.mu + sum(self.delta)
        if self.omega is not None:
            total += inst.left_turn_budget * self.omega
        return total

    def column_reduced_cost(self, col: Column) -> float:
        from .pricing import reduced_cost

        return reduced_cost(
            col.profit,
            sum(self.u[e] for e in col.edges),
            self.v[col.od],
            self.mu,
            col.time,
            self.turn_cost,
            col.left_turns,
        )


def extract_duals(sol: LpSolution, maps: RmpMaps) -> Duals:
    if not sol.optimal:
        raise NotOptimal(f"LP status is {sol.status}")
    y = sol.row_duals
    return Duals(
        v={od: float(y[r]) for od, r in maps.demand_row.items()},
        u=tuple(float(y[maps.capacity_row[e]]) if e in maps.capacity_row else 0.0 for e in range(maps.num_edges)),
        pi=float(y[maps.budget_row]),
        mu=float(y[maps.fleet_row]),
        omega=None if maps.left_turn_row is None else float(y[maps.left_turn_row]),
        delta=tuple(float(sol.bound_duals[maps.x_var[e]]) if e in maps.x_var else 0.0 for e in range(maps.num_edges)),
    )


@dataclass
class LinkMaps:
    x_var: list[int]
    served_var: dict[OD, int]
    flow_var: dict[OD, list[int]]


def build_link_lp(inst: Instance) -> tuple[LinearProgram, LinkMaps]:
    """Arc-flow LP relaxation; only valid without path-level limits."""
    if inst.has_left_turn_row or any(m != math.inf for m in inst.time_limit_table.values()):
        raise PathConstraintsActive("link formulation cannot express travel-time or left-turn limits")
    net = inst.network
    lp = LinearProgram()
    x_var = [lp.add_variable(0.0, 0.0, 1.0, name=f"x[{e.id}]") for e in net.edges]
    served, flows = {}, {}
    for dem in inst.demands:
        served[dem.od] = lp.add_variable(0.0, 0.0, dem.alpha, name=f"f[{dem.origin},{dem.dest}]")
        flows[dem.od] = [
            lp.add_variable(e.profit_rate, 0.0, math.inf, name=f"f[{dem.origin},{dem.dest}][{e.id}]")
            for e in net.edges
        ]
    for dem in inst.demands:
        fv = flows[dem.od]
        for v in range(net.num_nodes):
            coeffs: dict[int, float] = {}
            for eid in net.out_adjacency[v]:
                coeffs[fv[eid]] = coeffs.get(fv[eid], 0.0) + 1.0
            for eid in net.in_adjacency[v]:
                coeffs[fv[eid]] = coeffs.get(fv[eid], 0.0) - 1.0
            if v == dem.origin:
                coeffs[served[dem.od]] = -1.0
            elif v == dem.dest:
                coeffs[served[dem.od]] = 1.0
            if not coeffs:
                continue
            lp.add_row(coeffs, 0.0, name=f"flow[{dem.origin},{dem.dest}][{v}]<=")
            lp.add_row({j: -a for j, a in coeffs.items()}, 0.0, name=f"flow[{dem.origin},{dem.dest}][{v}]>=")
    for e in net.edges:
        coeffs = {flows[dem.od][e.id]: 1.0 for dem in inst.demands}
        coeffs[x_var[e.id]] = -e.capacity
        lp.add_row(coeffs, 0.0, name=f"capacity[{e.id}]")
    lp.add_row({x_var[e.id]: e.build_cost for e in net.edges}, inst.budget, name="budget")
    lp.add_row(
        {flows[dem.od][e.id]: e.travel_time for dem in inst.demands for e in net.edges},
        inst.fleet_time,
        name="fleet_time",
    )
    return lp, LinkMaps(x_var, served, flows)


@dataclass(frozen=True)
class RobustConfig:
    time_radius: Mapping[int, float] = field(default_factory=dict)
    demand_radius: Mapping[OD, float] = field(default_factory=dict)

    def __post_init__(self):
        for key, r in list(self.time_radius.items()) + list(self.demand_radius.items()):
            if not r >= 0 or not math.isfinite(r):
                raise ValueError(f"robust radius for {key} must be finite and >= 0, got {r}")

    @classmethod
    def uniform(cls, inst: Instance, time_fraction: float = 0.0, demand_fraction: float = 0.0) -> "RobustConfig":
        return cls(
            time_radius={e.id: time_fraction * e.travel_time for e in inst.network.edges},
            demand_radius={dem.od: demand_fraction * dem.alpha for dem in inst.demands},
        )

    def is_zero(self) -> bool:
        return not any(self.time_radius.values()) and not any(self.demand_radius.values())


def apply_robust(inst: Instance, rc: RobustConfig) -> Instance:
    """Deterministic counterpart of box uncertainty on edge times and OD demand.

    Edge times are inflated by their radius and demand bounds tightened by
    theirs. Travel-time limits are fixed from the nominal network first so the
    admissible path sets can only shrink.
    """
    limits = dict(inst.time_limit_table)
    edges = [replace(e, travel_time=e.travel_time + rc.time_radius.get(e.id, 0.0)) for e in inst.network.edges]
    net = inst.network.with_edges(edges)
    demands = []
    for dem in inst.demands:
        alpha = dem.alpha - rc.demand_radius.get(dem.od, 0.0)
        if alpha <= 0:
            logger.warning("robust demand for OD %s clamped to 0; OD dropped", dem.od)
            limits.pop(dem.od, None)
            continue
        demands.append(replace(dem, alpha=alpha))
    return replace(inst, network=net, demands=tuple(demands), time_limits=limits)
