"""Parameter sweeps over (R, B) and over the left-turn budget.

Every cell is a full column-generation solve. Feasible sets are nested
along each axis, so the integer solution of a tighter cell is feasible in
a looser one. Integer recovery in each cell is therefore given the paths
and designs of the cells it dominates, and the reported integer profit is
nondecreasing along the axes no matter where the tree search stops.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, replace
from typing import Sequence

from .colgen import CgParams, CgResult, column_generation, recover_integer, run_column_generation
from .master import Column, Instance
from .mip import MipParams
from .instances import unconstrained

logger = logging.getLogger(__name__)

DEFAULT_FRACTIONS = (0.0, 0.25, 0.5, 1.0, 1.5)
DEFAULT_LT_SCALES = (0.0, 1.0, 2.0, 5.0, 10.0, math.inf)
# Per-cell branch-and-bound node cap for (R, B) sweeps. Cells that hit it keep
# the best design found (status "node_limit"); seeding from dominated cells
# keeps the profit surface monotone either way.
CELL_NODE_LIMIT = 200


@dataclass
class Baseline:
    """The unconstrained solve and the usage figures used for normalization."""

    result: CgResult
    profit: float  # F_b
    fleet_time: float  # T_b
    budget: float  # C_b


@dataclass
class Cell:
    fleet_time: float
    budget: float
    left_turn_budget: float | None
    result: CgResult | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.result is not None


def fleet_time_used(result: CgResult) -> float:
    return math.fsum(col.time * f for col, f in zip(result.ip_maps.columns, result.f_ip))


def budget_used(result: CgResult) -> float:
    edges = result.instance.network.edges
    return math.fsum(edges[e].build_cost for e, v in result.x_ip.items() if v == 1)


def left_turns_used(result: CgResult) -> float:
    return math.fsum(col.left_turns * f for col, f in zip(result.ip_maps.columns, result.f_ip))


def served_demand(result: CgResult) -> float:
    return math.fsum(result.f_ip)


def solve_baseline(inst: Instance, cg: CgParams = CgParams(), mip: MipParams = MipParams()) -> Baseline:
    result = run_column_generation(unconstrained(inst), cg, mip)
    return Baseline(result, result.J_IP, fleet_time_used(result), budget_used(result))


def _used_columns(result: CgResult) -> list[Column]:
    return [col for col, f in zip(result.ip_maps.columns, result.f_ip) if f > 0.0]


def _chained_cells(
    variants: Sequence[Instance],
    predecessors: Sequence[Sequence[int]],
    seed: Sequence[Column],
    extra: Sequence[CgResult],
    cg: CgParams,
    mip: MipParams,
) -> list[tuple[CgResult | None, str | None]]:
    """Solve each variant by column generation, then recover an integer design.

    ``predecessors[k]`` lists earlier variants whose feasible set is contained
    in variant k's. Their integer solutions (design plus flow-carrying paths)
    are added to variant k's MILP, so each stays feasible there. ``extra``
    holds further solutions offered to every variant the same way.
    """
    out: list[tuple[CgResult | None, str | None]] = []
    for k, inst in enumerate(variants):
        t0 = time.perf_counter()
        try:
            phase = column_generation(inst, cg, seed)
        except Exception as exc:  # recorded per cell; the sweep continues
            logger.warning("cell %d failed during column generation: %s", k + 1, exc)
            out.append((None, f"{type(exc).__name__}: {exc}"))
            continue
        donors = list(extra) + [out[p][0] for p in predecessors[k] if out[p][0] is not None]
        columns = list(phase.master.ordered())
        for donor in donors:
            columns += _used_columns(donor)
        try:
            res = recover_integer(phase, mip, columns, [d.x_ip for d in donors])
        except Exception as exc:
            logger.warning("cell %d failed during integer recovery: %s", k + 1, exc)
            out.append((None, f"{type(exc).__name__}: {exc}"))
            continue
        logger.info(
            "cell %d/%d: J_LP=%.8g J_IP=%.8g status=%s nodes=%d (%.1fs)",
            k + 1, len(variants), res.J_LP, res.J_IP, res.ip_solution.status, res.ip_solution.nodes,
            time.perf_counter() - t0,
        )
        out.append((res, None))
    return out


def run_sensitivity(
    inst: Instance,
    fleet_fractions: Sequence[float] = DEFAULT_FRACTIONS,
    budget_fractions: Sequence[float] = DEFAULT_FRACTIONS,
    cg: CgParams = CgParams(),
    mip: MipParams = MipParams(),
    baseline: Baseline | None = None,
    cell_node_limit: int | None = CELL_NODE_LIMIT,
) -> tuple[Baseline, list[Cell]]:
    """One solve per (R, B) cell with R = fraction · T_b and B = fraction · C_b.

    Cells come back in grid order: fleet fraction outer, budget fraction inner.
    The baseline is solved with ``mip`` as given; cells use at most
    ``cell_node_limit`` tree nodes (None for no extra cap).
    """
    if not fleet_fractions or not budget_fractions:
        raise ValueError("sensitivity grid is empty")
    fr = sorted(fleet_fractions)
    fb = sorted(budget_fractions)
    if baseline is None:
        baseline = solve_baseline(inst, cg, mip)
    seed = baseline.result.master.ordered()
    variants, preds, coords = [], [], []
    for i, a in enumerate(fr):
        for j, b in enumerate(fb):
            variants.append(
                replace(inst, fleet_time=a * baseline.fleet_time, budget=b * baseline.budget, left_turn_budget=None)
            )
            coords.append((i, j))
            preds.append([k for k, (pi, pj) in enumerate(coords[:-1]) if pi <= i and pj <= j])
    cell_mip = mip if cell_node_limit is None else replace(mip, node_limit=min(mip.node_limit, cell_node_limit))
    solved = _chained_cells(variants, preds, seed, [baseline.result], cg, cell_mip)
    cells = [
        Cell(v.fleet_time, v.budget, None, res, err) for v, (res, err) in zip(variants, solved)
    ]
    return baseline, cells


def run_left_turn_sweep(
    inst: Instance,
    scale: float,
    multipliers: Sequence[float] = DEFAULT_LT_SCALES,
    cg: CgParams = CgParams(),
    mip: MipParams = MipParams(),
) -> list[Cell]:
    """Solve ``inst`` with LT = multiplier · scale for each multiplier, in increasing order.

    An infinite multiplier drops the left-turn row and is solved exactly like
    the instance without one.
    """
    mults = sorted(multipliers)
    finite = [m for m in mults if math.isfinite(m)]
    seed = column_generation(replace(inst, left_turn_budget=None), cg).master.ordered()
    variants = [replace(inst, left_turn_budget=m * scale) for m in finite]
    preds = [list(range(k)) for k in range(len(variants))]
    solved = _chained_cells(variants, preds, seed, [], cg, mip) if variants else []
    cells = [Cell(v.fleet_time, v.budget, v.left_turn_budget, res, err) for v, (res, err) in zip(variants, solved)]
    for _ in mults[len(finite) :]:
        unbounded = replace(inst, left_turn_budget=math.inf)
        try:
            cells.append(Cell(inst.fleet_time, inst.budget, math.inf, run_column_generation(unbounded, cg, mip)))
        except Exception as exc:
            cells.append(Cell(inst.fleet_time, inst.budget, math.inf, None, f"{type(exc).__name__}: {exc}"))
    return cells
