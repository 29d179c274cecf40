import logging
import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from amodnd.lp import solve_lp
from amodnd.master import (
    Demand,
    InadmissiblePath,
    Instance,
    NotOptimal,
    PathConstraintsActive,
    RestrictedMaster,
    RobustConfig,
    apply_robust,
    build_link_lp,
    build_rmp,
    extract_duals,
    make_column,
)
from amodnd.network import Edge, Node, build_network
from amodnd.oracle import all_admissible_columns, solve_full_lp

from randgen import random_instance


def net3():
    nodes = [Node(0, 40.0, -74.0), Node(1, 40.001, -74.0), Node(2, 40.001, -73.999)]
    edges = [
        Edge(0, 0, 1, 10.0, 110.0, 10.0, 3.0, 5.0),
        Edge(1, 1, 2, 5.0, 85.0, 10.0, 3.0, 5.0),
        Edge(2, 0, 2, 12.0, 140.0, 10.0, 4.0, 1.0),
    ]
    return build_network(nodes, edges)


def tri_instance(**kw):
    args = dict(budget=100.0, fleet_time=1000.0)
    args.update(kw)
    return Instance(net3(), [Demand(0, 2, 8.0)], **args)


def test_row_count_two_ods_three_edges():
    inst = Instance(net3(), [Demand(0, 2, 8.0), Demand(0, 1, 2.0)], budget=10.0, fleet_time=50.0)
    lp, maps = build_rmp(inst, RestrictedMaster(inst))
    assert lp.num_rows == 2 + 3 + 1 + 1
    assert maps.left_turn_row is None


def test_empty_path_set_gives_zero():
    inst = tri_instance()
    lp, maps = build_rmp(inst, RestrictedMaster(inst))
    sol = solve_lp(lp)
    assert sol.objective_value == 0.0
    assert all(sol.primal[j] == 0.0 for j in maps.x_var.values())


def test_left_turn_row_coefficients():
    inst = tri_instance(left_turn_budget=1.0)
    cols = all_admissible_columns(inst)
    lp, maps = build_rmp(inst, RestrictedMaster(inst, cols))
    assert lp.num_rows == 1 + 3 + 1 + 1 + 1
    row = lp.rows[maps.left_turn_row]
    for j, col in zip(maps.path_vars, maps.columns):
        assert row.get(j, 0.0) == col.left_turns


def test_inadmissible_column_rejected():
    inst = tri_instance(detour_factor=1.0)
    with pytest.raises(InadmissiblePath):
        RestrictedMaster(inst, [make_column(inst, (0, 2), (0, 1))])


def test_slack_demand_row_has_zero_dual():
    inst = tri_instance(fleet_time=24.0)  # fleet time binds long before alpha=8
    cols = all_admissible_columns(inst)
    lp, maps = build_rmp(inst, RestrictedMaster(inst, cols))
    duals = extract_duals(solve_lp(lp), maps)
    assert duals.v[(0, 2)] == pytest.approx(0.0, abs=1e-12)
    assert duals.omega is None
    assert duals.turn_cost == 0.0


def test_strong_duality_on_triangle():
    inst = tri_instance()
    J, sol, maps = solve_full_lp(inst)
    duals = extract_duals(sol, maps)
    assert duals.dual_objective(inst) == pytest.approx(J, rel=1e-9)
    assert min(duals.u + duals.delta + (duals.pi, duals.mu)) >= -1e-12


def test_extract_duals_requires_optimal():
    inst = tri_instance()
    sol = solve_lp(build_rmp(inst, RestrictedMaster(inst))[0])
    sol.status = "infeasible"
    with pytest.raises(NotOptimal):
        extract_duals(sol, build_rmp(inst, RestrictedMaster(inst))[1])


def test_link_lp_single_edge_bottleneck():
    net = build_network([Node(0), Node(1)], [Edge(0, 0, 1, 4.0, 10.0, 3.0, 2.0, 5.0)])
    inst = Instance(net, [Demand(0, 1, 10.0)], budget=5.0, fleet_time=8.0, detour_factor=math.inf)
    sol = solve_lp(build_link_lp(inst)[0])
    assert sol.objective_value == pytest.approx(5.0 * min(10.0, 3.0, 8.0 / 4.0))


def test_link_lp_zero_budget():
    inst = tri_instance(budget=0.0, detour_factor=math.inf)
    assert solve_lp(build_link_lp(inst)[0]).objective_value == pytest.approx(0.0, abs=1e-12)


def test_link_lp_refuses_path_limits():
    with pytest.raises(PathConstraintsActive):
        build_link_lp(tri_instance())
    with pytest.raises(PathConstraintsActive):
        build_link_lp(tri_instance(detour_factor=math.inf, left_turn_budget=2.0))


def test_link_equals_path_on_four_node_dag():
    rng = random.Random(3)
    inst = random_instance(rng, n=4, gamma=math.inf, dag=True, profit=(0.0, 5.0))
    J_path, _, _ = solve_full_lp(inst)
    J_link = solve_lp(build_link_lp(inst)[0]).objective_value
    assert J_link == pytest.approx(J_path, rel=1e-7, abs=1e-9)


def test_robust_examples(caplog):
    inst = Instance(net3(), [Demand(0, 2, 5.0), Demand(0, 1, 1.0)], budget=10.0, fleet_time=100.0)
    rc = RobustConfig({0: 2.0}, {(0, 2): 1.0, (0, 1): 3.0})
    with caplog.at_level(logging.WARNING):
        rob = apply_robust(inst, rc)
    assert rob.network.edges[0].travel_time == 12.0
    assert rob.demand((0, 2)).alpha == 4.0
    assert [d.od for d in rob.demands] == [(0, 2)]
    assert "clamped" in caplog.text
    assert rob.time_limit_table[(0, 2)] == inst.time_limit_table[(0, 2)]


def test_robust_rejects_negative_radius():
    with pytest.raises(ValueError):
        RobustConfig({0: -1.0})


def test_zero_radii_keep_instance_values():
    inst = tri_instance()
    rob = apply_robust(inst, RobustConfig.uniform(inst))
    assert rob.network == inst.network
    assert rob.demands == inst.demands
    assert rob.time_limit_table == inst.time_limit_table


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_stored_columns_dual_feasible(seed):
    inst = random_instance(random.Random(seed), n=random.Random(seed).randint(3, 8))
    J, sol, maps = solve_full_lp(inst)
    duals = extract_duals(sol, maps)
    for col in maps.columns:
        assert duals.column_reduced_cost(col) <= 1e-7
