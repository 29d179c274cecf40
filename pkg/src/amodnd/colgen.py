"""Column generation over the path-based design model, plus integer recovery."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .lp import LpSolution, solve_lp
from .master import (
    OD,
    Column,
    Duals,
    Instance,
    RestrictedMaster,
    RmpMaps,
    build_rmp,
    extract_duals,
    make_column,
)
from .mip import ZERO_TOL, MipParams, MipSolution, solve_restricted_milp
from .network import Infeasible, PreprocessResult, preprocess_od, reverse_graph, shortest_path_edges
from .pricing import PricingContext, ReachTable, build_reach_table, edge_pricing_cost, solve_sprc

logger = logging.getLogger(__name__)

GAP_TOL = 1e-9


class RootInfeasible(RuntimeError):
    pass


class NegativeGap(ValueError):
    pass


@dataclass(frozen=True)
class CgParams:
    epsilon: float = 1e-6
    max_iterations: int = 1000
    columns_per_od: int = 1
    parallel_pricing: bool = False
    workers: int = 4
    dominance_slack: float = 0.0

    def __post_init__(self):
        if not self.epsilon > 1e-7:
            raise ValueError("epsilon must exceed the LP duality-gap tolerance (1e-7)")
        if self.columns_per_od < 1 or self.max_iterations < 1:
            raise ValueError("columns_per_od and max_iterations must be >= 1")


@dataclass
class IterationRecord:
    iteration: int
    objective: float
    columns_added: int
    max_reduced_cost: float


@dataclass
class CgResult:
    instance: Instance
    master: RestrictedMaster
    maps: RmpMaps
    lp_solution: LpSolution
    duals: Duals
    J_LP: float
    ip_solution: MipSolution
    ip_maps: RmpMaps
    J_IP: float
    gap: float
    iterations: int
    converged: bool
    log: list[IterationRecord] = field(default_factory=list)
    dropped: list[OD] = field(default_factory=list)

    @property
    def path_set(self) -> dict[OD, list[Column]]:
        return self.master.columns

    @property
    def x_lp(self) -> dict[int, float]:
        return {eid: float(self.lp_solution.primal[j]) for eid, j in self.maps.x_var.items()}

    @property
    def f_lp(self) -> list[float]:
        return [float(self.lp_solution.primal[j]) for j in self.maps.path_vars]

    @property
    def x_ip(self) -> dict[int, int]:
        return {eid: self.ip_solution.x.get(eid, 0) for eid in range(self.instance.network.num_edges)}

    @property
    def f_ip(self) -> list[float]:
        return [float(self.ip_solution.primal[j]) for j in self.ip_maps.path_vars]


def optimality_gap(J_LP: float, J_IP: float, tol: float = GAP_TOL) -> float:
    """Relative LP-to-integer gap; 0 when nothing is profitable."""
    if J_IP > J_LP + tol * max(1.0, abs(J_LP)):
        raise NegativeGap(f"integer objective {J_IP} exceeds LP bound {J_LP}")
    if J_LP <= ZERO_TOL:
        return 0.0
    return max(J_LP - J_IP, 0.0) / J_LP


def preprocess_all(inst: Instance) -> tuple[dict[OD, PreprocessResult], list[OD]]:
    """Prune the graph for every OD; ODs without an admissible path are dropped."""
    rev = reverse_graph(inst.network)
    kept, dropped = {}, []
    for dem in inst.demands:
        limit = inst.time_limit_table[dem.od]
        try:
            kept[dem.od] = preprocess_od(inst.network, dem.origin, dem.dest, limit, reverse=rev)
        except Infeasible:
            logger.warning("OD %s has no path within its time limit %.6g; dropped", dem.od, limit)
            dropped.append(dem.od)
    return kept, dropped


def initial_columns(inst: Instance, pre: dict[OD, PreprocessResult]) -> list[Column]:
    cols = []
    for dem in inst.demands:
        if dem.od not in pre:
            continue
        edges = shortest_path_edges(inst.network, dem.origin, dem.dest)
        if edges is None:
            continue
        col = make_column(inst, dem.od, edges)
        cols.append(col)
    return cols


def _pricing_context(
    inst: Instance, od: OD, pre: PreprocessResult, duals: Duals, edge_cost, slack, reach=None
) -> PricingContext:
    return PricingContext(
        network=inst.network,
        od=od,
        time_limit=pre.time_limit,
        bounds=pre.dist_to_d,
        edge_cost=edge_cost,
        turn_cost=duals.turn_cost,
        left_turns=inst.left_turns,
        robust_slack=slack,
        reach=reach,
    )


def price_od(
    inst: Instance,
    od: OD,
    pre: PreprocessResult,
    duals: Duals,
    edge_cost,
    params: CgParams,
    reach: ReachTable | None = None,
) -> list[tuple[float, Column]]:
    """Columns for one OD with reduced cost above epsilon, best first."""
    ctx = _pricing_context(inst, od, pre, duals, edge_cost, params.dominance_slack, reach)
    if params.columns_per_od == 1:
        best = solve_sprc(ctx, pre)
        found = [] if best is None else [best]
    else:
        found = solve_sprc(ctx, pre, pareto=True)
    out = []
    for priced in found:
        rc = priced.reduced_cost(duals.v[od])
        if rc > params.epsilon:
            out.append((rc, make_column(inst, od, priced.path)))
        if len(out) >= params.columns_per_od:
            break
    if not out and found:
        out_rc = found[0].reduced_cost(duals.v[od])
        return [(out_rc, None)]
    return out


def solve_design(
    inst: Instance,
    master: RestrictedMaster,
    mip_params: MipParams = MipParams(),
    incumbents: Iterable[Mapping[int, int]] = (),
) -> tuple[MipSolution, RmpMaps]:
    """Integer design over the stored columns.

    Edges no stored column uses are left out (opening them only spends
    budget) and the OD-edge linking rows are added to tighten the bound.
    ``incumbents`` are designs known to be feasible, tried before branching.
    """
    used = sorted({eid for col in master.ordered() for eid in col.edges})
    lp, maps = build_rmp(inst, master, edges=used, linking=True)
    starts = [{e: v for e, v in design.items() if e in maps.x_var} for design in incumbents]
    ip = solve_restricted_milp(
        lp, dict(maps.x_var), mip_params, heuristic=_greedy_designs(inst, maps), incumbents=starts
    )
    return ip, maps


def _greedy_designs(inst: Instance, maps: RmpMaps):
    """Open the edges of flow-carrying paths, largest flow first, while the budget lasts."""
    edges = inst.network.edges

    def propose(primal: np.ndarray):
        flows = [(-primal[j], k) for k, j in enumerate(maps.path_vars) if primal[j] > 1e-9]
        flows.sort()
        opened: set[int] = set()
        spent = 0.0
        for _, k in flows:
            extra = [e for e in maps.columns[k].edges if e not in opened]
            cost = sum(edges[e].build_cost for e in extra)
            if spent + cost <= inst.budget:
                opened.update(extra)
                spent += cost
        yield {e: 1 for e in opened}

    return propose


@dataclass
class LpPhase:
    """State of column generation at termination, before integer recovery."""

    instance: Instance
    master: RestrictedMaster
    maps: RmpMaps
    lp_solution: LpSolution
    duals: Duals
    iterations: int
    converged: bool
    log: list[IterationRecord]
    dropped: list[OD]

    @property
    def J_LP(self) -> float:
        return self.lp_solution.objective_value


def column_generation(
    inst: Instance, params: CgParams = CgParams(), seed_columns: Iterable[Column] | None = None
) -> LpPhase:
    """Alternate restricted-master solves and exact pricing until no column prices out."""
    pre, dropped = preprocess_all(inst)
    if not pre:
        logger.warning("no OD pair has an admissible path")
    master = RestrictedMaster(inst)
    for col in initial_columns(inst, pre):
        master.add(col)
    for col in seed_columns or ():
        if col.od in pre:
            master.add(col)

    reach = {od: build_reach_table(inst.network, p) for od, p in pre.items()}
    log: list[IterationRecord] = []
    converged = False
    executor = ThreadPoolExecutor(max_workers=params.workers) if params.parallel_pricing else None
    try:
        iteration = 0
        while True:
            iteration += 1
            lp, maps = build_rmp(inst, master)
            sol = solve_lp(lp)
            if not sol.optimal:
                raise RootInfeasible(f"restricted master is {sol.status}")
            duals = extract_duals(sol, maps)
            edge_cost = tuple(edge_pricing_cost(e, duals.mu, duals.u[e.id]) for e in inst.network.edges)
            ods = [dem.od for dem in inst.demands if dem.od in pre]

            def job(od):
                return price_od(inst, od, pre[od], duals, edge_cost, params, reach[od])

            # map() returns results in OD order regardless of completion order
            results = list(executor.map(job, ods)) if executor else [job(od) for od in ods]
            added = 0
            max_rc = -math.inf
            for found in results:
                for rc, col in found:
                    max_rc = max(max_rc, rc)
                    if col is not None and master.add(col):
                        added += 1
                    elif col is not None:
                        logger.warning("pricing returned stored column %s (rc=%.3g); ignored", col.nodes, rc)
            log.append(IterationRecord(iteration, sol.objective_value, added, max_rc))
            logger.info("iter %d: J_RMP=%.10g added=%d max_rc=%.3g", iteration, sol.objective_value, added, max_rc)
            if added == 0:
                converged = True
                break
            if iteration >= params.max_iterations:
                logger.warning("column generation hit the iteration limit (%d)", params.max_iterations)
                lp, maps = build_rmp(inst, master)
                sol = solve_lp(lp)
                duals = extract_duals(sol, maps)
                break
    finally:
        if executor:
            executor.shutdown()
    return LpPhase(inst, master, maps, sol, duals, iteration, converged, log, dropped)


def recover_integer(
    phase: LpPhase,
    mip_params: MipParams = MipParams(),
    columns: Iterable[Column] | None = None,
    incumbents: Iterable[Mapping[int, int]] = (),
) -> CgResult:
    """Integer design over the final path set (or over ``columns`` when given)."""
    inst = phase.instance
    pool = phase.master if columns is None else RestrictedMaster(inst, columns)
    ip, ip_maps = solve_design(inst, pool, mip_params, incumbents)
    gap = optimality_gap(phase.J_LP, ip.objective)
    # the integer point is LP-feasible, so it lifts a bound that rounding left a few ulps short
    J_LP = max(phase.J_LP, ip.objective)
    return CgResult(
        instance=inst,
        master=phase.master,
        maps=phase.maps,
        lp_solution=phase.lp_solution,
        duals=phase.duals,
        J_LP=J_LP,
        ip_solution=ip,
        ip_maps=ip_maps,
        J_IP=ip.objective,
        gap=gap,
        iterations=phase.iterations,
        converged=phase.converged,
        log=phase.log,
        dropped=phase.dropped,
    )


def run_column_generation(
    inst: Instance,
    params: CgParams = CgParams(),
    mip_params: MipParams = MipParams(),
    seed_columns: Iterable[Column] | None = None,
) -> CgResult:
    """Column generation to LP optimality, then the restricted MILP over the final path set."""
    return recover_integer(column_generation(inst, params, seed_columns), mip_params)
