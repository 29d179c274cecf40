import copy
import json
import logging
import math
import shutil
from pathlib import Path

import pytest

from amodnd import io
from amodnd.cli import (
    EXIT_INPUT,
    EXIT_INVALID,
    EXIT_OK,
    RunConfig,
    ValidationError,
    config_from_mapping,
    load_instance,
    main,
)
from amodnd.solution import validate_solution

FIXTURES = Path(__file__).parent / "fixtures"
TRIANGLE = FIXTURES / "triangle"
LEFT_TURN = FIXTURES / "left_turn"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, out


def solve(capsys, graph, out_dir, *extra):
    code, out = run(capsys, "solve", "--graph", graph, "-o", out_dir, *extra)
    assert code == EXIT_OK, out
    return json.loads((Path(out_dir) / "solution.json").read_text())


def test_triangle_fixture_loads():
    inst = load_instance(RunConfig(graph_path=str(TRIANGLE)))
    assert inst.network.num_nodes == 3
    assert inst.network.num_edges == 3
    assert [d.od for d in inst.demands] == [(0, 2)]


def test_demand_rows_filtered(tmp_path, caplog):
    p = tmp_path / "demand.csv"
    p.write_text("origin,dest,alpha\n0,0,3\n0,2,0\n0,1,-2\n0,2,4\n", encoding="utf-8")
    with caplog.at_level(logging.WARNING):
        demands = io.read_demands(p)
    assert [(d.od, d.alpha) for d in demands] == [((0, 2), 4.0)]
    assert "origin equals destination" in caplog.text
    assert "nonpositive demand" in caplog.text


def test_duplicate_demand_is_an_error(tmp_path):
    p = tmp_path / "demand.csv"
    p.write_text("origin,dest,alpha\n0,2,1\n0,2,4\n", encoding="utf-8")
    with pytest.raises(io.ParseError) as err:
        io.read_demands(p)
    assert err.value.line == 3


def test_parse_error_points_at_line_and_field(tmp_path):
    p = tmp_path / "edges.csv"
    p.write_text("src,dst,travel_time_s,length_m,capacity,build_cost,beta\n0,1,5,10,1,1,2\n1,2,fast,10,1,1,2\n", encoding="utf-8")
    with pytest.raises(io.ParseError) as err:
        io.read_edges(p)
    assert (err.value.line, err.value.field) == (3, "travel_time_s")


def test_missing_column(tmp_path):
    p = tmp_path / "nodes.csv"
    p.write_text("id,lat\n0,1\n", encoding="utf-8")
    with pytest.raises(io.ParseError) as err:
        io.read_nodes(p)
    assert err.value.field == "lon"


def test_beta_derived_from_rates(tmp_path):
    p = tmp_path / "edges.csv"
    p.write_text("src,dst,travel_time_s,length_m,capacity,build_cost,beta\n0,1,5,100,1,1,\n", encoding="utf-8")
    assert io.read_edges(p, 0.003, 0.001)[0].profit_rate == pytest.approx(0.2)
    with pytest.raises(io.ParseError):
        io.read_edges(p)


def test_solution_files_and_round_trip(tmp_path, capsys):
    doc = solve(capsys, TRIANGLE, tmp_path / "out")
    assert doc["J_IP"] == pytest.approx(80.0)
    for name in ("solution.json", "timings.json", "subnetwork.geojson", "flows.geojson", "iterations.csv"):
        assert (tmp_path / "out" / name).exists()
    geo = json.loads((tmp_path / "out" / "subnetwork.geojson").read_text())
    assert geo["type"] == "FeatureCollection"
    assert len(geo["features"]) == len(doc["instrumented_edges"])
    flows = json.loads((tmp_path / "out" / "flows.geojson").read_text())
    assert {f["properties"]["edge"] for f in flows["features"]} == {r["edge"] for r in doc["edge_flows"]}
    assert "output_dir" not in doc["config"]
    code, out = run(capsys, "validate", "--graph", TRIANGLE, tmp_path / "out" / "solution.json")
    assert code == EXIT_OK and json.loads(out)["passed"]


def test_usage_matches_recomputation(tmp_path, capsys):
    doc = solve(capsys, TRIANGLE, tmp_path)
    inst = load_instance(RunConfig(graph_path=str(TRIANGLE)))
    spent = math.fsum(inst.network.edges[r["edge"]].build_cost for r in doc["instrumented_edges"])
    fleet = math.fsum(p["time"] * p["flow"] for p in doc["paths"])
    assert abs(doc["usage"]["budget"] - spent) <= 1e-9
    assert abs(doc["usage"]["fleet_time"] - fleet) <= 1e-9


def test_repeat_runs_byte_identical(tmp_path, capsys):
    solve(capsys, TRIANGLE, tmp_path / "a")
    solve(capsys, TRIANGLE, tmp_path / "b", "--parallel-pricing")
    assert (tmp_path / "a" / "solution.json").read_bytes() == (tmp_path / "b" / "solution.json").read_bytes()


def test_zero_radii_match_deterministic(tmp_path, capsys):
    solve(capsys, TRIANGLE, tmp_path / "a")
    doc = solve(capsys, TRIANGLE, tmp_path / "b", "--robust-time", 0, "--robust-demand", 0)
    base = json.loads((tmp_path / "a" / "solution.json").read_text())
    assert doc == base


def test_left_turn_budget_zero_blocks_only_profitable_path(tmp_path, capsys):
    free = solve(capsys, LEFT_TURN, tmp_path / "a")
    capped = solve(capsys, LEFT_TURN, tmp_path / "b", "--left-turn-budget", 0)
    assert free["J_IP"] == pytest.approx(35.0)
    assert [p["nodes"] for p in free["paths"]] == [[0, 1, 2]]
    assert free["paths"][0]["left_turns"] == 1
    assert capped["J_IP"] == pytest.approx(0.0)
    assert capped["paths"] == []


def _edit(doc, fn):
    bad = copy.deepcopy(doc)
    fn(bad)
    return bad


def test_validate_catches_edits(tmp_path, capsys):
    doc = solve(capsys, TRIANGLE, tmp_path)
    inst = load_instance(RunConfig(graph_path=str(TRIANGLE)))
    assert validate_solution(inst, doc).passed

    def overflow(d):
        d["paths"][0]["flow"] = 9.0

    rep = validate_solution(inst, _edit(doc, overflow))
    assert not rep.checks["demand"].passed

    def close_edge(d):
        d["instrumented_edges"] = [r for r in d["instrumented_edges"] if r["edge"] != d["paths"][0]["edges"][0]]

    rep = validate_solution(inst, _edit(doc, close_edge))
    assert not rep.checks["capacity"].passed
    assert rep.checks["demand"].passed

    def fake_profit(d):
        d["J_IP"] = d["J_IP"] + 1.0

    assert not validate_solution(inst, _edit(doc, fake_profit)).checks["objective"].passed

    def loop(d):
        d["paths"][0]["nodes"] = [0, 1, 0, 2]

    assert not validate_solution(inst, _edit(doc, loop)).checks["paths"].passed


def test_validate_exit_code(tmp_path, capsys):
    doc = solve(capsys, TRIANGLE, tmp_path)
    doc["paths"][0]["flow"] = 50.0
    io.dump_json(doc, tmp_path / "bad.json")
    code, out = run(capsys, "validate", "--graph", TRIANGLE, tmp_path / "bad.json")
    assert code == EXIT_INVALID
    assert not json.loads(out)["passed"]


def test_error_json_for_bad_input(tmp_path, capsys):
    code, out = run(capsys, "solve", "--graph", tmp_path / "missing")
    assert code == EXIT_INPUT
    assert json.loads(out)["error"] == "validation_error"
    graph = tmp_path / "g"
    shutil.copytree(TRIANGLE, graph)
    (graph / "edges.csv").write_text("src,dst,travel_time_s,length_m,capacity,build_cost,beta\n0,1,0,1,1,1,1\n", encoding="utf-8")
    code, out = run(capsys, "solve", "--graph", graph, "-o", tmp_path / "o")
    assert code == EXIT_INPUT
    assert "travel_time" in json.loads(out)["message"]


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"graph_path": str(TRIANGLE), "budget": 3.5, "mip": {"node_limit": 7}}), encoding="utf-8")
    doc = solve(capsys, TRIANGLE, tmp_path / "o", "--config", cfg, "--budget", 4)
    assert doc["config"]["budget"] == 4.0
    assert doc["config"]["mip"]["node_limit"] == 7
    with pytest.raises(ValidationError):
        config_from_mapping({"bogus": 1})


def test_oracle_check(capsys):
    code, out = run(capsys, "oracle-check", "--graph", TRIANGLE)
    report = json.loads(out)
    assert code == EXIT_OK
    assert report["lp_match"] and report["pricing_certificate"]


def test_gen_then_solve(tmp_path, capsys):
    code, out = run(capsys, "gen", tmp_path / "city", "--rows", 4, "--cols", 4, "--ods", 4, "--seed", 3)
    assert code == EXIT_OK
    assert json.loads(out)["nodes"] == 16
    doc = solve(capsys, tmp_path / "city", tmp_path / "o", "--config", tmp_path / "city" / "config.json")
    assert doc["config"]["detour_factor"] == 1.3
    inst = load_instance(RunConfig(graph_path=str(tmp_path / "city"), detour_factor=1.3))
    assert validate_solution(inst, doc).passed


def test_sensitivity_cli(tmp_path, capsys):
    code, _ = run(
        capsys, "sensitivity", "--graph", TRIANGLE, "-o", tmp_path, "--fleet-fractions", "0,1", "--budget-fractions", "0.5,1"
    )
    assert code == EXIT_OK
    rows = (tmp_path / "sensitivity.csv").read_text().splitlines()
    assert rows[0].startswith("fleet_fraction,budget_fraction")
    assert len(rows) == 5
