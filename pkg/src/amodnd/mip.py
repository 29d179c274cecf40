"""Best-bound branch and bound over binary design variables of an LP."""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Mapping

import numpy as np

from .lp import LinearProgram, LpSolution, solve_dense

logger = logging.getLogger(__name__)


class MipInfeasible(RuntimeError):
    pass


@dataclass(frozen=True)
class MipParams:
    rel_gap_target: float = 1e-6
    node_limit: int = 100_000
    time_limit: float = 3600.0
    integrality_tol: float = 1e-6

    def __post_init__(self):
        if not (self.rel_gap_target > 0 and self.node_limit > 0 and self.time_limit > 0 and self.integrality_tol > 0):
            raise ValueError("MIP parameters must be positive")


@dataclass
class MipSolution:
    x: dict[Hashable, int]
    primal: np.ndarray
    objective: float
    bound: float
    rel_gap: float
    status: str
    nodes: int = 0


ZERO_TOL = 1e-9  # objectives below this are LP round-off


def relative_gap(bound: float, objective: float) -> float:
    if bound <= ZERO_TOL and objective >= min(bound, 0.0) - ZERO_TOL:
        return 0.0
    return max(bound - objective, 0.0) / max(abs(bound), 1e-12)


def solve_restricted_milp(
    lp: LinearProgram,
    binary_vars: Mapping[Hashable, int],
    params: MipParams = MipParams(),
    heuristic: Callable[[np.ndarray], Iterable[Mapping[Hashable, int]]] | None = None,
    incumbents: Iterable[Mapping[Hashable, int]] = (),
) -> MipSolution:
    """Maximize ``lp`` with the variables in ``binary_vars`` restricted to {0, 1}.

    Branches on the most fractional binary (ties: smallest key) and explores
    open nodes by best bound. The all-zero design seeds the incumbent; at each
    fractional node the design obtained by rounding every positive binary up
    is tried as a further incumbent, together with any designs proposed by
    ``heuristic`` (called with the node's LP primal). ``incumbents`` are
    starting designs (missing keys mean 0); infeasible ones are ignored.
    """
    c, A, b, lo, up = lp.dense()
    keys = sorted(binary_vars)
    idx = np.array([binary_vars[k] for k in keys], dtype=int)
    started = time.monotonic()

    def solve(lower, upper, warm: LpSolution | None = None) -> LpSolution:
        return solve_dense(c, A, b, lower, upper, warm_start=warm)

    root = solve(lo, up)
    if root.status != "optimal":
        raise MipInfeasible(f"root relaxation is {root.status}")

    inc_obj = 0.0
    inc_fix: np.ndarray | None = np.zeros(len(idx))
    zero_lo, zero_up = lo.copy(), up.copy()
    zero_up[idx] = 0.0
    zero_sol = solve(zero_lo, zero_up)
    if zero_sol.status == "optimal":
        inc_obj = zero_sol.objective_value
    else:
        inc_fix, inc_obj = None, -math.inf

    heap: list = []
    counter = 0
    heapq.heappush(heap, (-root.objective_value, counter, lo.copy(), up.copy(), root))
    nodes = 0
    status = "optimal"
    tol = params.integrality_tol

    tried: set[bytes] = set()

    def try_pattern(pattern: np.ndarray, warm: LpSolution) -> None:
        nonlocal inc_obj, inc_fix
        key = pattern.tobytes()
        if key in tried:
            return
        tried.add(key)
        hlo, hup = lo.copy(), up.copy()
        hlo[idx] = pattern
        hup[idx] = pattern
        trial = solve(hlo, hup, warm)
        if trial.status == "optimal" and trial.objective_value > inc_obj:
            inc_obj, inc_fix = trial.objective_value, pattern

    def try_heuristics(node: LpSolution) -> None:
        try_pattern((node.primal[idx] > tol).astype(float), node)
        if heuristic is not None:
            for design in heuristic(node.primal):
                try_pattern(np.array([float(design.get(k, 0)) for k in keys]), node)

    def close_enough(bound: float) -> bool:
        return bound - inc_obj <= params.rel_gap_target * max(abs(bound), 1e-12) + 1e-12

    for design in incumbents:
        try_pattern(np.array([float(design.get(k, 0)) for k in keys]), root)

    while heap:
        neg_bound, _, nlo, nup, sol = heap[0]
        if close_enough(-neg_bound):
            break
        if nodes >= params.node_limit:
            status = "node_limit"
            break
        if time.monotonic() - started > params.time_limit:
            status = "time_limit"
            break
        heapq.heappop(heap)
        vals = sol.primal[idx]
        frac = np.abs(vals - np.round(vals))
        if frac.max(initial=0.0) <= tol:
            if sol.objective_value > inc_obj:
                inc_obj = sol.objective_value
                inc_fix = np.round(vals)
            continue
        try_heuristics(sol)
        if close_enough(sol.objective_value):
            continue
        # most fractional; argmax keeps the smallest key on ties
        k = int(np.argmax(np.minimum(vals - np.floor(vals), np.ceil(vals) - vals)))
        j = idx[k]
        nodes += 1
        for fix in (0.0, 1.0):
            clo, cup = nlo.copy(), nup.copy()
            clo[j] = cup[j] = fix
            child = solve(clo, cup, sol)
            if child.status != "optimal":
                continue
            if close_enough(child.objective_value) or child.objective_value <= inc_obj:
                continue
            counter += 1
            child.factor = None  # recomputed on demand; keeps the open-node heap small
            heapq.heappush(heap, (-child.objective_value, counter, clo, cup, child))

    bound = max(inc_obj, -heap[0][0]) if heap else inc_obj
    bound = min(bound, root.objective_value)
    gap = relative_gap(bound, inc_obj)
    if status == "optimal" and gap > 0:
        status = "gap_limit"
    if inc_fix is None:
        raise MipInfeasible("no integer-feasible design found")

    # Re-solve with the design fixed so flows are exactly consistent with a 0/1 x.
    flo, fup = lo.copy(), up.copy()
    flo[idx] = inc_fix
    fup[idx] = inc_fix
    final = solve(flo, fup)  # cold: the reported flows must not depend on the search path
    if final.status != "optimal":
        raise MipInfeasible("fixed-design LP is not solvable")
    obj = final.objective_value
    gap = relative_gap(bound, obj)
    return MipSolution(
        x={key: int(v) for key, v in zip(keys, inc_fix)},
        primal=final.primal,
        objective=obj,
        bound=bound,
        rel_gap=gap,
        status=status,
        nodes=nodes,
    )
