import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from amodnd.lp import (
    INFEASIBLE,
    OPTIMAL,
    TOL_FEAS,
    TOL_GAP,
    UNBOUNDED,
    LinearProgram,
    certificate_errors,
    solve_dense,
    solve_lp,
)

from randgen import random_bounded_lp


def vertex_optimum(c, A, b, lower, upper):
    """Best objective over all basic feasible points of a bounded polytope; None if empty."""
    n = len(c)
    G = np.vstack([A, np.eye(n), -np.eye(n)])
    h = np.concatenate([b, upper, -lower])
    combos = np.array(list(itertools.combinations(range(len(h)), n)))
    M = G[combos]
    rhs = h[combos]
    ok = np.abs(np.linalg.det(M)) > 1e-9
    if not ok.any():
        return None
    z = np.linalg.solve(M[ok], rhs[ok][..., None])[..., 0]
    feas = np.all(z @ G.T <= h + 1e-9, axis=1)
    if not feas.any():
        return None
    return float(np.max(z[feas] @ c))


def test_single_constraint():
    lp = LinearProgram()
    z = lp.add_variable(3.0)
    lp.add_row({z: 1.0}, 2.0)
    sol = solve_lp(lp)
    assert sol.status == OPTIMAL
    assert sol.primal[0] == pytest.approx(2.0)
    assert sol.objective_value == pytest.approx(6.0)
    assert sol.row_duals[0] == pytest.approx(3.0)


def test_infeasible():
    lp = LinearProgram()
    z = lp.add_variable(1.0)
    lp.add_row({z: 1.0}, -1.0)
    assert solve_lp(lp).status == INFEASIBLE


def test_unbounded():
    lp = LinearProgram()
    lp.add_variable(1.0)
    assert solve_lp(lp).status == UNBOUNDED


def test_bound_dual_on_binding_upper():
    lp = LinearProgram()
    x = lp.add_variable(2.0, 0.0, 1.0)
    y = lp.add_variable(1.0)
    lp.add_row({x: 1.0, y: 1.0}, 3.0)
    sol = solve_lp(lp)
    assert sol.objective_value == pytest.approx(4.0)
    assert sol.row_duals[0] == pytest.approx(1.0)
    assert sol.bound_duals[x] == pytest.approx(1.0)


def test_rejects_bad_input():
    lp = LinearProgram()
    with pytest.raises(ValueError):
        lp.add_variable(1.0, 2.0, 1.0)
    z = lp.add_variable(1.0)
    with pytest.raises(ValueError):
        lp.add_row({z: math.inf}, 1.0)
    with pytest.raises(ValueError):
        lp.add_row({7: 1.0}, 1.0)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_lp_against_vertex_oracle(seed):
    c, A, b, lo, up = random_bounded_lp(np.random.default_rng(seed))
    sol = solve_dense(c, A, b, lo, up)
    ref = vertex_optimum(c, A, b, lo, up)
    if ref is None:
        assert sol.status == INFEASIBLE
        return
    assert sol.status == OPTIMAL
    assert sol.objective_value == pytest.approx(ref, rel=1e-8, abs=1e-8)
    err = certificate_errors(sol, c, A, b, lo, up)
    assert err["primal"] <= TOL_FEAS and err["dual"] <= TOL_FEAS and err["cs"] <= TOL_FEAS
    assert err["gap"] <= TOL_GAP


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_warm_start_matches_cold(seed):
    rng = np.random.default_rng(seed)
    c, A, b, lo, up = random_bounded_lp(rng)
    parent = solve_dense(c, A, b, lo, up)
    if parent.status != OPTIMAL:
        return
    j = int(rng.integers(len(c)))
    lo2, up2 = lo.copy(), up.copy()
    lo2[j] = up2[j] = float(rng.choice([lo[j], up[j]]))
    cold = solve_dense(c, A, b, lo2, up2)
    warm = solve_dense(c, A, b, lo2, up2, warm_start=parent)
    assert warm.status == cold.status
    if cold.status == OPTIMAL:
        assert warm.objective_value == pytest.approx(cold.objective_value, rel=1e-9, abs=1e-9)


def test_deterministic():
    c, A, b, lo, up = random_bounded_lp(np.random.default_rng(5))
    s1, s2 = solve_dense(c, A, b, lo, up), solve_dense(c, A, b, lo, up)
    assert s1.status == s2.status
    assert np.array_equal(s1.primal, s2.primal, equal_nan=True)
    assert np.array_equal(s1.row_duals, s2.row_duals, equal_nan=True)
