"""Seeded synthetic instances: a Manhattan-like grid city and small random graphs."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .master import Demand, Instance
from .network import Edge, Node, build_network

# Synthetic economics (currency units per meter). Declared values, not calibrated.
FARE_PER_METER = 0.003
COST_PER_METER_RANGE = (0.001, 0.004)
EARTH_RADIUS_M = 6_371_000.0


@dataclass(frozen=True)
class GridCitySpec:
    rows: int = 8
    cols: int = 8
    block_m: float = 200.0
    num_ods: int = 12
    detour_factor: float = 1.3
    seed: int = 0
    origin_lat: float = 40.75
    origin_lon: float = -73.99


def planar_distance(a: Node, b: Node) -> float:
    """Equirectangular distance in meters."""
    lat0 = math.radians(0.5 * (a.lat + b.lat))
    dx = math.radians(b.lon - a.lon) * math.cos(lat0)
    dy = math.radians(b.lat - a.lat)
    return EARTH_RADIUS_M * math.hypot(dx, dy)


def grid_city(spec: GridCitySpec = GridCitySpec()) -> Instance:
    """A jittered rows x cols street grid with two-way streets and random OD demand.

    Budgets are set to the unconstrained values (every edge affordable, fleet
    time enough to route all demand on its longest admissible path).
    """
    rng = np.random.default_rng(spec.seed)
    dlat = math.degrees(spec.block_m / EARTH_RADIUS_M)
    dlon = dlat / math.cos(math.radians(spec.origin_lat))
    nodes = []
    for r in range(spec.rows):
        for c in range(spec.cols):
            jl, jo = (float(v) for v in rng.uniform(-0.08, 0.08, size=2))
            nodes.append(Node(r * spec.cols + c, spec.origin_lat + (r + jl) * dlat, spec.origin_lon + (c + jo) * dlon))

    pairs = []
    for r in range(spec.rows):
        for c in range(spec.cols):
            v = r * spec.cols + c
            if c + 1 < spec.cols:
                pairs += [(v, v + 1), (v + 1, v)]
            if r + 1 < spec.rows:
                pairs += [(v, v + spec.cols), (v + spec.cols, v)]
    pairs.sort()
    edges = []
    for eid, (a, b) in enumerate(pairs):
        length = planar_distance(nodes[a], nodes[b])
        speed = float(rng.uniform(6.0, 12.0))
        cost_rate = float(rng.uniform(*COST_PER_METER_RANGE))
        edges.append(
            Edge(
                id=eid,
                src=a,
                dst=b,
                travel_time=round(length / speed, 3),
                length=round(length, 3),
                capacity=round(float(rng.uniform(20.0, 60.0)), 3),
                build_cost=round(length * float(rng.uniform(0.8, 1.2)), 3),
                profit_rate=round((FARE_PER_METER - cost_rate) * length, 6),
            )
        )
    net = build_network(nodes, edges)

    n = spec.rows * spec.cols
    ods: dict[tuple[int, int], float] = {}
    while len(ods) < spec.num_ods:
        o, d = (int(v) for v in rng.choice(n, size=2, replace=False))
        manhattan = abs(o // spec.cols - d // spec.cols) + abs(o % spec.cols - d % spec.cols)
        if manhattan < 3 or (o, d) in ods:
            continue
        ods[(o, d)] = round(float(rng.uniform(5.0, 30.0)), 3)
    demands = tuple(Demand(o, d, a) for (o, d), a in sorted(ods.items()))
    inst = Instance(net, demands, budget=0.0, fleet_time=0.0, detour_factor=spec.detour_factor)
    return unconstrained(inst)


def unconstrained_budget(inst: Instance) -> float:
    return float(sum(e.build_cost for e in inst.network.edges))


def unconstrained_fleet_time(inst: Instance) -> float:
    """Fleet time that no admissible flow can exceed: Σ α_od · M_od."""
    limits = inst.time_limit_table
    total = 0.0
    for dem in inst.demands:
        m = limits[dem.od]
        if math.isfinite(m):
            total += dem.alpha * m
        else:
            total += dem.alpha * sum(e.travel_time for e in inst.network.edges)
    return float(total)


def unconstrained(inst: Instance) -> Instance:
    """Copy of ``inst`` whose budget, fleet-time and left-turn rows cannot bind."""
    return replace(
        inst, budget=unconstrained_budget(inst), fleet_time=unconstrained_fleet_time(inst), left_turn_budget=None
    )
