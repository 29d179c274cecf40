import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from amodnd.network import Edge, Infeasible, Node, build_network, left_turn_table, preprocess_od
from amodnd.pricing import (
    Label,
    NodesDiffer,
    PricingContext,
    dominates,
    edge_pricing_cost,
    extend_label,
    reduced_cost,
    solve_sprc,
)

from randgen import dfs_paths, random_network


def mk_edge(i, a, b, t, beta=0.0):
    return Edge(i, a, b, t, 10.0, 1.0, 1.0, beta)


def context(net, pre, costs, turn_cost=0.0, lefts=None, slack=0.0):
    return PricingContext(
        network=net,
        od=pre.od,
        time_limit=pre.time_limit,
        bounds=pre.dist_to_d,
        edge_cost=tuple(costs),
        turn_cost=turn_cost,
        left_turns=lefts or {},
        robust_slack=slack,
    )


@pytest.mark.parametrize(
    "mu,t,u,beta,expected",
    [(2.0, 10.0, 1.0, 5.0, 16.0), (0.0, 10.0, 0.0, 5.0, -5.0), (0.0, 10.0, 0.0, 0.0, 0.0)],
)
def test_edge_pricing_cost(mu, t, u, beta, expected):
    assert edge_pricing_cost(mk_edge(0, 0, 1, t, beta), mu, u) == expected


def test_reduced_cost_arithmetic():
    assert reduced_cost(10.0, 1.0, 2.0, 0.1, 15.0) == pytest.approx(5.5, abs=1e-12)
    assert reduced_cost(7.0, 0.0, 0.0, 0.0, 99.0) == 7.0


def lab(node, cost, time, visited):
    bits = 0
    for v in visited:
        bits |= 1 << v
    return Label(node, cost, time, bits)


def test_dominance_examples():
    o, u, v = 0, 1, 2
    assert dominates(lab(v, 3, 4, {o, v}), lab(v, 5, 4, {o, u, v}))
    same = lab(v, 3, 4, {o, v})
    assert not dominates(same, lab(v, 3, 4, {o, v}))
    l1, l2 = lab(v, 3, 9, {o, v}), lab(v, 5, 4, {o, v})
    assert not dominates(l1, l2, 0.0)
    assert dominates(l1, l2, 10.0)


def test_dominance_needs_common_node():
    with pytest.raises(NodesDiffer):
        dominates(lab(1, 0, 0, {1}), lab(2, 0, 0, {2}))


def triangle(t_oa=10.0, t_ad=5.0, t_od=12.0):
    nodes = [Node(0), Node(1), Node(2)]
    return build_network(nodes, [mk_edge(0, 0, 1, t_oa), mk_edge(1, 1, 2, t_ad), mk_edge(2, 0, 2, t_od)])


def test_extend_rejects_revisit():
    net = build_network([Node(0), Node(1), Node(2)], [mk_edge(0, 0, 1, 1.0), mk_edge(1, 1, 0, 1.0), mk_edge(2, 1, 2, 1.0)])
    pre = preprocess_od(net, 0, 2, math.inf)
    ctx = context(net, pre, [0.0] * 3)
    at_a = lab(1, 0.0, 1.0, {0, 1})
    assert extend_label(at_a, net.edges[1], ctx, 1 << 0) is None


def test_extend_rejects_late_completion():
    # l.time=10, T(e)=5, b(dst)=4, M=18
    net = build_network([Node(0), Node(1), Node(2)], [mk_edge(0, 0, 1, 5.0), mk_edge(1, 1, 2, 4.0)])
    pre = preprocess_od(net, 0, 2, 100.0)
    ctx = PricingContext(net, (0, 2), 18.0, pre.dist_to_d, (0.0, 0.0))
    assert extend_label(lab(0, 0.0, 10.0, {0}), net.edges[0], ctx, 1 << 1) is None
    assert extend_label(lab(0, 0.0, 9.0, {0}), net.edges[0], ctx, 1 << 1) is not None


def test_extend_adds_turn_cost():
    net = build_network([Node(0), Node(1), Node(2)], [mk_edge(0, 0, 1, 1.0), mk_edge(1, 1, 2, 1.0)])
    pre = preprocess_od(net, 0, 2, math.inf)
    ctx = context(net, pre, [0.0, 1.0], turn_cost=2.0, lefts={0: frozenset({1})})
    parent = Label(1, 4.0, 1.0, 0b11, Label(0, 0.0, 0.0, 0b1), 0)
    child = extend_label(parent, net.edges[1], ctx, 1 << 2)
    assert child.cost == 4.0 + 3.0


@pytest.mark.parametrize("limit,path,cost", [(20.0, (0, 1, 2), -10.0), (14.0, (0, 2), 1.0)])
def test_sprc_triangle(limit, path, cost):
    net = triangle()
    pre = preprocess_od(net, 0, 2, limit)
    best = solve_sprc(context(net, pre, [-5.0, -5.0, 1.0]), pre)
    assert best.nodes == path
    assert best.cost == cost
    assert best.reduced_cost(2.0) == -cost - 2.0


def test_sprc_negative_cycle_stays_elementary():
    nodes = [Node(i) for i in range(4)]
    edges = [mk_edge(0, 0, 1, 1.0), mk_edge(1, 1, 2, 1.0), mk_edge(2, 2, 1, 1.0), mk_edge(3, 2, 3, 1.0), mk_edge(4, 1, 3, 1.0)]
    net = build_network(nodes, edges)
    costs = [1.0, -10.0, -10.0, 1.0, 5.0]
    pre = preprocess_od(net, 0, 3, 50.0)
    best = solve_sprc(context(net, pre, costs), pre)
    assert len(set(best.nodes)) == len(best.nodes)
    brute = min(sum(costs[e] for e in p) for p, _ in dfs_paths(net, 0, 3, 50.0))
    assert best.cost == brute == -8.0


def _sprc_case(seed):
    rng = random.Random(seed)
    net = random_network(rng, rng.randint(2, 12))
    o, d = rng.sample(range(net.num_nodes), 2)
    limit = rng.choice([math.inf, rng.uniform(2.0, 30.0)])
    costs = [rng.uniform(-10.0, 10.0) for _ in net.edges]
    return net, o, d, limit, costs


def _brute(net, o, d, limit, costs, turn_cost=0.0, lefts=None):
    best = None
    for edges, nodes in dfs_paths(net, o, d, limit):
        c = 0.0
        for k, e in enumerate(edges):
            c += costs[e]
            if turn_cost and k and e in (lefts or {}).get(edges[k - 1], ()):
                c += turn_cost
        if best is None or c < best[0]:
            best = (c, nodes)
    return best


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6))
def test_sprc_matches_enumeration(seed):
    net, o, d, limit, costs = _sprc_case(seed)
    brute = _brute(net, o, d, limit, costs)
    try:
        pre = preprocess_od(net, o, d, limit)
    except Infeasible:
        assert brute is None
        return
    ctx = context(net, pre, costs)
    results = [
        solve_sprc(ctx, pre),
        solve_sprc(ctx, pre, dominance=False),
        solve_sprc(ctx, pre, strengthen=False),
    ]
    for res in results:
        assert (res is None) == (brute is None)
        if res is not None:
            assert res.cost == pytest.approx(brute[0], abs=1e-9)
            assert len(set(res.nodes)) == len(res.nodes)
            assert res.time <= limit * (1 + 1e-12) + 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_sprc_turn_aware_matches_enumeration(seed):
    rng = random.Random(seed)
    net = random_network(rng, rng.randint(3, 9))
    o, d = rng.sample(range(net.num_nodes), 2)
    costs = [rng.uniform(-5.0, 5.0) for _ in net.edges]
    lefts = left_turn_table(net)
    omega = rng.uniform(0.5, 4.0)
    brute = _brute(net, o, d, math.inf, costs, omega, lefts)
    try:
        pre = preprocess_od(net, o, d, math.inf)
    except Infeasible:
        assert brute is None
        return
    res = solve_sprc(context(net, pre, costs, omega, lefts), pre)
    assert (res is None) == (brute is None)
    if res is not None:
        assert res.cost == pytest.approx(brute[0], abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_zero_turn_cost_and_slack_reduce_to_standard(seed):
    net, o, d, limit, costs = _sprc_case(seed)
    try:
        pre = preprocess_od(net, o, d, limit)
    except Infeasible:
        return
    plain = solve_sprc(context(net, pre, costs), pre)
    other = solve_sprc(context(net, pre, costs, 0.0, left_turn_table(net), 0.0), pre)
    assert plain == other


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_pareto_front_contains_optimum(seed):
    net, o, d, limit, costs = _sprc_case(seed)
    try:
        pre = preprocess_od(net, o, d, limit)
    except Infeasible:
        return
    ctx = context(net, pre, costs)
    front = solve_sprc(ctx, pre, pareto=True)
    best = solve_sprc(ctx, pre)
    assert front[0] == best
    assert [p.cost for p in front] == sorted(p.cost for p in front)
