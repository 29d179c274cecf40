"""Dense bounded-variable primal simplex returning primal and dual solutions.

Problems are stated as::

    maximize   c @ z
    subject to A @ z <= b          (one row per constraint)
               lower <= z <= upper (lower finite, upper may be inf)

Duals follow the maximization convention: row duals and upper-bound duals are
nonnegative, and at optimum

    c @ z == b @ y + upper @ delta - lower @ lam

with ``delta``/``lam`` the duals of binding upper/lower bounds.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

logger = logging.getLogger(__name__)

TOL_FEAS = 1e-9
TOL_GAP = 1e-7

_PIVOT_TOL = 1e-11
_OPT_TOL = 1e-11
_REFACTOR_EVERY = 64
_DEGENERATE_RUN_FOR_BLAND = 50

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class NumericalFailure(RuntimeError):
    pass


@dataclass
class LinearProgram:
    """A maximization LP built incrementally from sparse rows."""

    objective: list[float] = field(default_factory=list)
    lower: list[float] = field(default_factory=list)
    upper: list[float] = field(default_factory=list)
    rows: list[dict[int, float]] = field(default_factory=list)
    rhs: list[float] = field(default_factory=list)
    var_names: list[str] = field(default_factory=list)
    row_names: list[str] = field(default_factory=list)

    @property
    def num_vars(self) -> int:
        return len(self.objective)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def add_variable(self, obj: float = 0.0, lower: float = 0.0, upper: float = math.inf, name: str = "") -> int:
        if not lower <= upper:
            raise ValueError(f"variable {name!r}: lower {lower} > upper {upper}")
        if not math.isfinite(lower) or not math.isfinite(obj):
            raise ValueError(f"variable {name!r}: lower bound and objective must be finite")
        self.objective.append(float(obj))
        self.lower.append(float(lower))
        self.upper.append(float(upper))
        self.var_names.append(name or f"z{len(self.objective) - 1}")
        return len(self.objective) - 1

    def add_row(self, coeffs: Mapping[int, float], rhs: float, name: str = "") -> int:
        row = {}
        for j, a in coeffs.items():
            if not math.isfinite(a):
                raise ValueError(f"row {name!r}: non-finite coefficient on variable {j}")
            if not 0 <= j < self.num_vars:
                raise ValueError(f"row {name!r}: unknown variable {j}")
            if a != 0.0:
                row[j] = float(a)
        if not math.isfinite(rhs):
            raise ValueError(f"row {name!r}: non-finite rhs")
        self.rows.append(row)
        self.rhs.append(float(rhs))
        self.row_names.append(name or f"r{len(self.rows) - 1}")
        return len(self.rows) - 1

    def copy(self) -> "LinearProgram":
        return LinearProgram(
            objective=list(self.objective),
            lower=list(self.lower),
            upper=list(self.upper),
            rows=[dict(r) for r in self.rows],
            rhs=list(self.rhs),
            var_names=list(self.var_names),
            row_names=list(self.row_names),
        )

    def dense(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        A = np.zeros((self.num_rows, self.num_vars))
        for i, row in enumerate(self.rows):
            for j, a in row.items():
                A[i, j] = a
        return (
            np.array(self.objective, dtype=float),
            A,
            np.array(self.rhs, dtype=float),
            np.array(self.lower, dtype=float),
            np.array(self.upper, dtype=float),
        )


@dataclass
class LpSolution:
    status: str
    primal: np.ndarray
    row_duals: np.ndarray
    bound_duals: np.ndarray
    lower_duals: np.ndarray
    objective_value: float
    iterations: int = 0
    basis: tuple[int, ...] | None = None
    at_upper: tuple[int, ...] = ()
    warm_started: bool = False
    # inverse of the final basis in the unflipped working frame, when available;
    # lets a warm start skip one factorization
    factor: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _empty(status: str, n: int, m: int, iterations: int = 0) -> LpSolution:
    nan = float("nan")
    return LpSolution(
        status=status,
        primal=np.full(n, nan),
        row_duals=np.full(m, nan),
        bound_duals=np.full(n, nan),
        lower_duals=np.full(n, nan),
        objective_value=math.inf if status == UNBOUNDED else nan,
        iterations=iterations,
    )


class _Simplex:
    """Working state of one solve over the standard form ``M @ w == rhs``."""

    AT_LOWER, AT_UPPER, BASIC = 0, 1, 2

    def __init__(
        self,
        M: np.ndarray,
        rhs: np.ndarray,
        upper: np.ndarray,
        basis: list[int],
        refactor_every: int = _REFACTOR_EVERY,
        bland: bool = False,
        defer: bool = False,
    ):
        self.M = M
        self.refactor_every = refactor_every
        self.always_bland = bland
        self.rhs = rhs
        self.upper = upper
        self.m, self.N = M.shape
        self.basis = list(basis)
        self.status = np.zeros(self.N, dtype=np.int8)
        self.status[self.basis] = self.BASIC
        self.x = np.zeros(self.N)
        self.pivots = 0
        self._since_refactor = 0
        if not defer:
            self.refactor()

    def refactor(self) -> None:
        B = self.M[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular basis") from exc
        at_upper = self.status == self.AT_UPPER
        nonbasic = self.status != self.BASIC
        self.x[nonbasic] = 0.0
        self.x[at_upper] = self.upper[at_upper]
        resid = self.rhs - self.M[:, at_upper] @ self.upper[at_upper]
        self.x[self.basis] = self.Binv @ resid
        self._since_refactor = 0

    def run(self, cost: np.ndarray, max_pivots: int) -> str:
        degenerate_run = 0
        bland = self.always_bland
        while True:
            if self.pivots >= max_pivots:
                raise NumericalFailure(f"pivot limit {max_pivots} reached")
            y = cost[self.basis] @ self.Binv
            d = cost - y @ self.M
            fixed = self.upper <= 0.0
            cand_lo = (self.status == self.AT_LOWER) & (d > _OPT_TOL) & ~fixed
            cand_up = (self.status == self.AT_UPPER) & (d < -_OPT_TOL) & ~fixed
            eligible = np.flatnonzero(cand_lo | cand_up)
            if eligible.size == 0:
                return OPTIMAL
            if bland:
                j = int(eligible[0])
            else:
                # argmax returns the first maximizer: smallest index on ties
                j = int(eligible[np.argmax(np.abs(d[eligible]))])
            direction = 1.0 if self.status[j] == self.AT_LOWER else -1.0
            alpha = self.Binv @ self.M[:, j]
            step = direction * alpha
            xb = self.x[self.basis]
            ub = self.upper[self.basis]
            theta = math.inf
            leave = -1
            leave_to_upper = False
            dec = step > _PIVOT_TOL
            inc = step < -_PIVOT_TOL
            ratios = np.full(self.m, math.inf)
            ratios[dec] = np.maximum(xb[dec], 0.0) / step[dec]
            inc_finite = inc & np.isfinite(ub)
            ratios[inc_finite] = np.maximum(ub[inc_finite] - xb[inc_finite], 0.0) / -step[inc_finite]
            if np.isfinite(ratios).any():
                theta = float(ratios.min())
                ties = np.flatnonzero(ratios <= theta + 1e-12 * (1.0 + theta))
                if bland:
                    r = int(ties[np.argmin(np.array(self.basis)[ties])])
                else:
                    r = int(ties[np.argmax(np.abs(step[ties]))])
                leave = r
                leave_to_upper = bool(inc[r])
            own = self.upper[j]
            if own <= theta:
                theta = own
                leave = -1
            if theta == math.inf:
                return UNBOUNDED
            self.pivots += 1
            if theta <= 1e-12:
                degenerate_run += 1
                if degenerate_run >= _DEGENERATE_RUN_FOR_BLAND:
                    bland = True
            else:
                degenerate_run = 0
                bland = self.always_bland
            self.x[self.basis] = xb - theta * step
            if leave < 0:
                # bound flip, basis unchanged
                if self.status[j] == self.AT_LOWER:
                    self.status[j] = self.AT_UPPER
                    self.x[j] = self.upper[j]
                else:
                    self.status[j] = self.AT_LOWER
                    self.x[j] = 0.0
                continue
            old = self.basis[leave]
            self.x[j] = theta if direction > 0 else self.upper[j] - theta
            if leave_to_upper:
                self.status[old] = self.AT_UPPER
                self.x[old] = self.upper[old]
            else:
                self.status[old] = self.AT_LOWER
                self.x[old] = 0.0
            self.status[j] = self.BASIC
            self.basis[leave] = j
            piv = alpha[leave]
            row = self.Binv[leave] / piv
            self.Binv -= np.outer(alpha, row)
            self.Binv[leave] = row
            self._since_refactor += 1
            if self._since_refactor >= self.refactor_every:
                self.refactor()


    def _update_primal(self) -> None:
        at_upper = self.status == self.AT_UPPER
        self.x[self.status != self.BASIC] = 0.0
        self.x[at_upper] = self.upper[at_upper]
        self.x[self.basis] = self.Binv @ (self.rhs - self.M[:, at_upper] @ self.upper[at_upper])

    def dual_run(self, cost: np.ndarray, max_pivots: int, feas_tol: float) -> str:
        """Bounded dual simplex from a dual feasible basis.

        Returns OPTIMAL once the basic values respect their bounds, or
        INFEASIBLE when some basic row cannot be repaired.
        """
        fixed = self.upper <= 0.0
        d = cost - (cost[self.basis] @ self.Binv) @ self.M
        while True:
            if self.pivots >= max_pivots:
                raise NumericalFailure(f"dual pivot limit {max_pivots} reached")
            nb_lo = (self.status == self.AT_LOWER) & ~fixed
            nb_up = (self.status == self.AT_UPPER) & ~fixed
            if (d[nb_lo] > 1e-9).any() or (d[nb_up] < -1e-9).any():
                raise NumericalFailure("basis is not dual feasible")
            xb = self.x[self.basis]
            ub = self.upper[self.basis]
            below = -xb
            above = np.where(np.isfinite(ub), xb - ub, -math.inf)
            infeas = np.maximum(below, above)
            r = int(np.argmax(infeas))
            if infeas[r] <= feas_tol:
                return OPTIMAL
            row = self.Binv[r] @ self.M
            to_lower = below[r] >= above[r]
            if to_lower:
                elig = (nb_lo & (row < -_PIVOT_TOL)) | (nb_up & (row > _PIVOT_TOL))
            else:
                elig = (nb_lo & (row > _PIVOT_TOL)) | (nb_up & (row < -_PIVOT_TOL))
            cand = np.flatnonzero(elig)
            if cand.size == 0:
                if infeas[r] <= 1e3 * feas_tol:
                    raise NumericalFailure("marginal infeasibility; not trusted")
                return INFEASIBLE
            ratios = np.abs(d[cand]) / np.abs(row[cand])
            theta = ratios.min()
            ties = cand[ratios <= theta + 1e-12 * (1.0 + theta)]
            j = int(ties[np.argmax(np.abs(row[ties]))])
            alpha = self.Binv @ self.M[:, j]
            piv = alpha[r]
            old = self.basis[r]
            target = 0.0 if to_lower else self.upper[old]
            step = (xb[r] - target) / piv
            # primal: entering j moves by step, the basic values follow -alpha
            self.x[self.basis] = xb - step * alpha
            self.x[j] = self.x[j] + step
            self.x[old] = target
            # dual: make d_j zero using the pivot row
            d = d - (d[j] / row[j]) * row
            d[j] = 0.0
            self.status[old] = self.AT_LOWER if to_lower else self.AT_UPPER
            self.status[j] = self.BASIC
            self.basis[r] = j
            prow = self.Binv[r] / piv
            self.Binv -= np.outer(alpha, prow)
            self.Binv[r] = prow
            self.pivots += 1
            self._since_refactor += 1
            if self._since_refactor >= self.refactor_every:
                self.refactor()
                d = cost - (cost[self.basis] @ self.Binv) @ self.M


def _solve_warm(c, A, b, lower, upper, scale, warm: LpSolution) -> LpSolution:
    """Re-solve from ``warm``'s basis after bound changes, using the dual simplex."""
    m, n = A.shape
    As = A * scale[:, None]
    rhs = (b - A @ lower) * scale
    N = n + m
    M = np.zeros((m, N))
    M[:, :n] = As
    M[:, n:] = np.eye(m)
    ub = np.concatenate([upper - lower, np.full(m, math.inf)])
    sx = _Simplex(M, rhs, ub, list(warm.basis), defer=True)
    for j in warm.at_upper:
        if sx.status[j] != _Simplex.BASIC and ub[j] > 0.0:
            sx.status[j] = _Simplex.AT_UPPER
    if warm.factor is None:
        warm.factor = np.linalg.inv(M[:, list(warm.basis)])
    sx.Binv = warm.factor.copy()
    sx._update_primal()
    cost = np.zeros(N)
    cost[:n] = c
    feas_tol = TOL_FEAS * 0.1 * (1.0 + float(np.abs(rhs).max(initial=0.0)))
    status = sx.dual_run(cost, 20 * (m + N) + 100, feas_tol)
    if status == INFEASIBLE:
        return _empty(INFEASIBLE, n, m, sx.pivots)
    if sx.run(cost, sx.pivots + 10 * (m + N) + 100) == UNBOUNDED:
        raise NumericalFailure("warm start reported unbounded")
    sol = _extract(sx, c, A, b, lower, upper, scale, np.ones(m), n, m)
    sol.iterations = sx.pivots
    sol.warm_started = True
    _verify(sol, c, A, b, lower, upper)
    sol.factor = sx.Binv
    return sol


def solve_lp(lp: LinearProgram, max_refinements: int = 3) -> LpSolution:
    """Solve ``lp``; raise NumericalFailure if the result cannot be certified."""
    c, A, b, lo, up = lp.dense()
    return solve_dense(c, A, b, lo, up, max_refinements=max_refinements)


def solve_dense(
    c: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    max_refinements: int = 3,
    warm_start: LpSolution | None = None,
) -> LpSolution:
    """Solve the LP given in dense form.

    ``warm_start`` is an optimal solution of an LP with the same ``c``, ``A``
    and ``b`` but other bounds; its basis seeds a dual simplex. Any failure
    of the warm path falls back to a cold solve.
    """
    m, n = A.shape if A.size else (len(b), len(c))
    A = A.reshape(m, n)
    if np.any(lower > upper):
        raise ValueError("lower bound exceeds upper bound")
    if np.any(~np.isfinite(lower)):
        raise ValueError("lower bounds must be finite")

    # Equilibrate rows; duals are mapped back below.
    scale = np.ones(m)
    if m:
        rowmax = np.abs(A).max(axis=1) if n else np.zeros(m)
        scale = np.where(rowmax > 0, 1.0 / np.where(rowmax > 0, rowmax, 1.0), 1.0)
    As = A * scale[:, None]
    bs = (b - A @ lower) * scale
    ushift = upper - lower

    if (
        warm_start is not None
        and warm_start.optimal
        and warm_start.basis is not None
        and m
        and all(j < n + m for j in warm_start.basis)
    ):
        try:
            return _solve_warm(c, A, b, lower, upper, scale, warm_start)
        except (NumericalFailure, np.linalg.LinAlgError) as exc:
            logger.debug("warm start abandoned: %s", exc)

    flip = bs < 0
    sign = np.where(flip, -1.0, 1.0)
    n_art = int(flip.sum())
    N = n + m + n_art
    M = np.zeros((m, N))
    M[:, :n] = As * sign[:, None]
    M[:, n : n + m] = np.diag(sign)
    art_rows = np.flatnonzero(flip)
    for k, i in enumerate(art_rows):
        M[i, n + m + k] = 1.0
    rhs = bs * sign
    ub = np.concatenate([ushift, np.full(m, math.inf), np.full(n_art, math.inf)])
    basis = [n + i if not flip[i] else n + m + int(np.searchsorted(art_rows, i)) for i in range(m)]

    max_pivots = 50 * (m + N) + 1000
    total_pivots = 0
    attempt_err: Exception | None = None
    for attempt in range(max_refinements):
        try:
            sx = _Simplex(
                M, rhs, ub, basis, refactor_every=max(_REFACTOR_EVERY >> (2 * attempt), 4), bland=attempt > 0
            )
            if n_art:
                phase1 = np.zeros(N)
                phase1[n + m :] = -1.0
                sx.run(phase1, max_pivots)
                sx.refactor()
                infeas = float(sx.x[n + m :].sum())
                if infeas > TOL_FEAS * (1.0 + float(np.abs(rhs).max(initial=0.0))):
                    return _empty(INFEASIBLE, n, m, sx.pivots)
                sx.upper = ub.copy()
                sx.upper[n + m :] = 0.0
                for k in range(n_art):
                    if sx.status[n + m + k] != _Simplex.BASIC:
                        sx.status[n + m + k] = _Simplex.AT_LOWER
                sx.refactor()
            cost = np.zeros(N)
            cost[:n] = c
            status = sx.run(cost, max_pivots)
            total_pivots += sx.pivots
            if status == UNBOUNDED:
                return _empty(UNBOUNDED, n, m, total_pivots)
            sx.refactor()
            # re-run after a fresh factorization in case drift hid an improving column
            status = sx.run(cost, max_pivots)
            if status == UNBOUNDED:
                return _empty(UNBOUNDED, n, m, total_pivots)
            sol = _extract(sx, c, A, b, lower, upper, scale, sign, n, m)
            sol.iterations = total_pivots
            _verify(sol, c, A, b, lower, upper)
            if n_art == 0:
                sol.factor = sx.Binv
            return sol
        except NumericalFailure as exc:
            attempt_err = exc
            logger.debug("simplex attempt %d failed: %s", attempt, exc)
    raise NumericalFailure(f"could not certify LP solution: {attempt_err}")


def _extract(sx: _Simplex, c, A, b, lower, upper, scale, sign, n, m) -> LpSolution:
    z = sx.x[:n] + lower
    z = np.minimum(np.maximum(z, lower), upper)
    cost = np.zeros(sx.N)
    cost[:n] = c
    y_scaled = cost[sx.basis] @ sx.Binv
    # row i of the working system is sign_i * scale_i * (original row i)
    y = y_scaled * sign * scale
    y = np.where(np.abs(y) < 1e-14, 0.0, y)
    y = np.maximum(y, 0.0)
    d = c - y @ A if m else c.copy()
    basic = np.zeros(n, dtype=bool)
    bidx = [j for j in sx.basis if j < n]
    basic[bidx] = True
    at_up = (sx.status[:n] == _Simplex.AT_UPPER)
    at_lo = (sx.status[:n] == _Simplex.AT_LOWER)
    delta = np.where(at_up & np.isfinite(upper), np.maximum(d, 0.0), 0.0)
    lam = np.where(at_lo, np.maximum(-d, 0.0), 0.0)
    # fixed variables sit at both bounds; attribute either sign
    fixed = (upper - lower) <= 0.0
    delta = np.where(fixed & ~basic, np.maximum(d, 0.0), delta)
    lam = np.where(fixed & ~basic, np.maximum(-d, 0.0), lam)
    obj = float(c @ z)
    return LpSolution(
        status=OPTIMAL,
        primal=z,
        row_duals=y,
        bound_duals=delta,
        lower_duals=lam,
        objective_value=obj,
        basis=tuple(sx.basis),
        at_upper=tuple(int(j) for j in np.flatnonzero(at_up & ~basic)),
    )


def certificate_errors(sol: LpSolution, c, A, b, lower, upper) -> dict[str, float]:
    """Scaled violations of primal/dual feasibility, duality gap and complementarity."""
    z, y, delta, lam = sol.primal, sol.row_duals, sol.bound_duals, sol.lower_duals
    row_act = A @ z if A.size else np.zeros(len(b))
    row_scale = 1.0 + (np.abs(A) @ np.abs(z) if A.size else 0.0) + np.abs(b)
    slack = b - row_act
    primal = max(
        float(np.max(-slack / row_scale, initial=0.0)),
        float(np.max(lower - z, initial=0.0)),
        float(np.max(z - upper, initial=0.0)),
    )
    red = c - (y @ A if A.size else 0.0) - delta + lam
    col_scale = 1.0 + np.abs(c) + (np.abs(y) @ np.abs(A) if A.size else 0.0)
    dual = max(float(np.max(np.abs(red) / col_scale, initial=0.0)), float(np.max(-y, initial=0.0)))
    fin_up = np.where(np.isfinite(upper), upper, 0.0)
    dual_obj = float(b @ y + fin_up @ delta - lower @ lam)
    gap = abs(sol.objective_value - dual_obj) / (1.0 + abs(sol.objective_value))
    cs_rows = float(np.max(y * np.maximum(slack, 0.0) / row_scale, initial=0.0))
    up_slack = np.where(np.isfinite(upper), upper - z, 0.0)
    cs_up = float(np.max(delta * up_slack / col_scale, initial=0.0))
    cs_lo = float(np.max(lam * (z - lower) / col_scale, initial=0.0))
    return {"primal": primal, "dual": dual, "gap": gap, "cs": max(cs_rows, cs_up, cs_lo), "dual_objective": dual_obj}


def _verify(sol: LpSolution, c, A, b, lower, upper) -> None:
    err = certificate_errors(sol, c, A, b, lower, upper)
    if err["primal"] > TOL_FEAS or err["dual"] > TOL_FEAS or err["cs"] > TOL_FEAS or err["gap"] > TOL_GAP:
        raise NumericalFailure(f"certificate check failed: {err}")
