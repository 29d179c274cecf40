"""Command line front end: load, solve, validate, sweep and export.

Log verbosity comes from the ``AMODND_LOG`` environment variable (DEBUG,
INFO, WARNING, ...). Failures print a JSON error object on stdout and exit
with a nonzero status.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from . import io
from .colgen import CgParams, CgResult, run_column_generation
from .instances import GridCitySpec, grid_city
from .master import Instance, RobustConfig, apply_robust
from .mip import MipParams
from .network import DEFAULT_LEFT_BAND, NetworkError, build_network
from .solution import solution_document, validate_solution
from .sweeps import (
    CELL_NODE_LIMIT,
    DEFAULT_FRACTIONS,
    budget_used,
    fleet_time_used,
    left_turns_used,
    run_sensitivity,
    served_demand,
)

logger = logging.getLogger("amodnd")

LOG_ENV = "AMODND_LOG"
EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_SOLVE, EXIT_INVALID = 0, 2, 3, 4, 5

# Run settings that change how a solve executes but never what it returns;
# they are left out of the config echo so output files stay comparable.
_EXECUTION_ONLY = ("output_dir", "parallel_pricing", "workers")


class ValidationError(ValueError):
    pass


@dataclass
class RunConfig:
    graph_path: str = ""  # directory holding nodes.csv and edges.csv
    demand_path: str = ""  # defaults to <graph_path>/demand.csv
    budget: float | None = None  # None: unconstrained
    fleet_time: float | None = None
    detour_factor: float = 1.5
    time_limits_path: str | None = None
    left_turn_budget: float | None = None
    left_turn_band: tuple[float, float] = DEFAULT_LEFT_BAND
    fare_per_meter: float | None = None
    cost_per_meter: float | None = None
    robust_time_fraction: float = 0.0
    robust_demand_fraction: float = 0.0
    robust_time_radius_path: str | None = None
    robust_demand_radius_path: str | None = None
    cg: CgParams = field(default_factory=CgParams)
    mip: MipParams = field(default_factory=MipParams)
    output_dir: str = "out"
    seed: int = 0

    def check(self) -> None:
        if not self.graph_path:
            raise ValidationError("graph_path is required")
        for name in ("graph_path", "demand_path", "time_limits_path", "robust_time_radius_path", "robust_demand_radius_path"):
            value = getattr(self, name)
            if value and not Path(value).exists():
                raise ValidationError(f"{name}: {value} does not exist")
        for name in ("budget", "fleet_time", "left_turn_budget"):
            value = getattr(self, name)
            if value is not None and not value >= 0:
                raise ValidationError(f"{name} must be nonnegative, got {value}")
        if not self.detour_factor >= 1:
            raise ValidationError(f"detour_factor must be >= 1, got {self.detour_factor}")
        lo, hi = self.left_turn_band
        if not 0 <= lo < hi <= 180:
            raise ValidationError(f"left_turn_band must satisfy 0 <= lo < hi <= 180, got {self.left_turn_band}")
        if self.robust_time_fraction < 0 or self.robust_demand_fraction < 0:
            raise ValidationError("robust fractions must be nonnegative")

    def echo(self) -> dict:
        out: dict[str, Any] = {}
        for f in dataclasses.fields(self):
            if f.name in _EXECUTION_ONLY:
                continue
            value = getattr(self, f.name)
            if dataclasses.is_dataclass(value):
                value = {k: v for k, v in dataclasses.asdict(value).items() if k not in _EXECUTION_ONLY}
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return json.loads(json.dumps(out, default=io.json_number))


def _coerce(value: Any, target: Any, name: str):
    if value is None:
        return None
    if isinstance(target, tuple):
        if not isinstance(value, (list, tuple)) or len(value) != len(target):
            raise ValidationError(f"{name}: expected a pair of numbers")
        return tuple(float(v) for v in value)
    if isinstance(target, bool):
        if not isinstance(value, bool):
            raise ValidationError(f"{name}: expected true/false")
        return value
    if isinstance(target, int):
        return int(value)
    if isinstance(target, float) or target is None:
        return io.parse_number(value) if isinstance(value, str) else float(value)
    return value


def config_from_mapping(data: dict, base: RunConfig | None = None) -> RunConfig:
    """Overlay ``data`` (as read from a JSON config) on ``base``; unknown keys are errors."""
    cfg = dataclasses.replace(base or RunConfig())
    known = {f.name: f for f in dataclasses.fields(RunConfig)}
    for key, value in data.items():
        if key not in known:
            raise ValidationError(f"unknown config key {key!r}")
        if key in ("cg", "mip"):
            current = getattr(cfg, key)
            sub = {f.name for f in dataclasses.fields(current)}
            bad = set(value) - sub
            if bad:
                raise ValidationError(f"unknown {key} keys: {sorted(bad)}")
            try:
                setattr(cfg, key, dataclasses.replace(current, **value))
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"{key}: {exc}") from exc
            continue
        current = getattr(cfg, key)
        if key in ("budget", "fleet_time", "left_turn_budget", "fare_per_meter", "cost_per_meter"):
            current = 0.0
        elif key.endswith("_path") or key == "output_dir":
            current = ""
        try:
            setattr(cfg, key, _coerce(value, current, key))
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{key}: {exc}") from exc
    return cfg


def load_instance(cfg: RunConfig) -> Instance:
    cfg.check()
    graph = Path(cfg.graph_path)
    nodes = io.read_nodes(graph / "nodes.csv")
    edges = io.read_edges(graph / "edges.csv", cfg.fare_per_meter, cfg.cost_per_meter)
    try:
        net = build_network(nodes, edges)
    except NetworkError as exc:
        raise ValidationError(str(exc)) from exc
    demands = io.read_demands(cfg.demand_path or graph / "demand.csv")
    time_limits = io.read_od_table(cfg.time_limits_path, "time_limit_s") if cfg.time_limits_path else None
    try:
        inst = Instance(
            network=net,
            demands=tuple(demands),
            budget=0.0,
            fleet_time=0.0,
            time_limits=time_limits,
            detour_factor=cfg.detour_factor,
            left_turn_budget=cfg.left_turn_budget,
            turn_band=cfg.left_turn_band,
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    from .instances import unconstrained_budget, unconstrained_fleet_time

    budget = cfg.budget if cfg.budget is not None and math.isfinite(cfg.budget) else unconstrained_budget(inst)
    fleet = cfg.fleet_time if cfg.fleet_time is not None and math.isfinite(cfg.fleet_time) else unconstrained_fleet_time(inst)
    inst = dataclasses.replace(inst, budget=budget, fleet_time=fleet)
    return _robust(inst, cfg)


def _robust(inst: Instance, cfg: RunConfig) -> Instance:
    rc = RobustConfig.uniform(inst, cfg.robust_time_fraction, cfg.robust_demand_fraction)
    time_radius = dict(rc.time_radius)
    demand_radius = dict(rc.demand_radius)
    if cfg.robust_time_radius_path:
        time_radius.update(io.read_edge_radii(cfg.robust_time_radius_path))
    if cfg.robust_demand_radius_path:
        demand_radius.update(io.read_od_table(cfg.robust_demand_radius_path, "radius"))
    rc = RobustConfig(time_radius, demand_radius)
    return inst if rc.is_zero() else apply_robust(inst, rc)


def iteration_rows(result: CgResult):
    for r in result.log:
        yield r.iteration, r.objective, r.columns_added, r.max_reduced_cost


def write_outputs(result: CgResult, cfg: RunConfig, timings: dict) -> io.ExportPaths:
    out = io.ExportPaths.under(cfg.output_dir)
    Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
    doc = solution_document(result, cfg.echo())
    io.dump_json(doc, out.solution)
    io.dump_json(timings, out.timings)
    net = result.instance.network
    io.dump_json(io.subnetwork_geojson(net, [item["edge"] for item in doc["instrumented_edges"]]), out.subnetwork)
    io.dump_json(io.flows_geojson(net, {item["edge"]: item["y"] for item in doc["edge_flows"]}), out.flows)
    io.write_csv(out.iterations, ("iteration", "objective", "columns_added", "max_reduced_cost"), iteration_rows(result))
    return out


def run_solve(cfg: RunConfig) -> tuple[CgResult, io.ExportPaths]:
    t0 = time.perf_counter()
    inst = load_instance(cfg)
    t1 = time.perf_counter()
    result = run_column_generation(inst, cfg.cg, cfg.mip)
    t2 = time.perf_counter()
    paths = write_outputs(result, cfg, {"load_s": t1 - t0, "solve_s": t2 - t1})
    logger.info("J_LP=%.10g J_IP=%.10g gap=%.3g status=%s", result.J_LP, result.J_IP, result.gap, result.ip_solution.status)
    return result, paths


SENSITIVITY_FIELDS = (
    "fleet_fraction",
    "budget_fraction",
    "fleet_time_R",
    "budget_B",
    "status",
    "J_LP",
    "J_IP",
    "gap",
    "profit_norm",
    "fleet_time_used",
    "fleet_time_norm",
    "budget_used",
    "budget_norm",
    "served",
    "error",
)


def sweep_csv_rows(baseline, cells):
    def norm(v, ref):
        return v / ref if ref > 0 else (0.0 if v == 0 else math.inf)

    for cell in cells:
        ff = cell.fleet_time / baseline.fleet_time if baseline.fleet_time > 0 else 0.0
        bf = cell.budget / baseline.budget if baseline.budget > 0 else 0.0
        r = cell.result
        if r is None:
            yield (ff, bf, cell.fleet_time, cell.budget, "failed", "", "", "", "", "", "", "", "", "", cell.error)
            continue
        t, b = fleet_time_used(r), budget_used(r)
        yield (
            ff,
            bf,
            cell.fleet_time,
            cell.budget,
            r.ip_solution.status,
            r.J_LP,
            r.J_IP,
            r.gap,
            norm(r.J_IP, baseline.profit),
            t,
            norm(t, baseline.fleet_time),
            b,
            norm(b, baseline.budget),
            served_demand(r),
            "",
        )


def run_sensitivity_cli(
    cfg: RunConfig, fleet_fractions, budget_fractions, cell_node_limit: int | None = CELL_NODE_LIMIT
) -> Path:
    inst = load_instance(cfg)
    baseline, cells = run_sensitivity(
        inst, fleet_fractions, budget_fractions, cfg.cg, cfg.mip, cell_node_limit=cell_node_limit
    )
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "sensitivity.csv"
    io.write_csv(path, SENSITIVITY_FIELDS, sweep_csv_rows(baseline, cells))
    io.dump_json(
        {
            "baseline": {"F_b": baseline.profit, "T_b": baseline.fleet_time, "C_b": baseline.budget},
            "config": cfg.echo(),
        },
        out_dir / "sensitivity_baseline.json",
    )
    return path


# --- argument handling -----------------------------------------------------


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with RunConfig keys; flags override it")
    p.add_argument("--graph", dest="graph_path", help="directory with nodes.csv and edges.csv")
    p.add_argument("--demand", dest="demand_path")
    p.add_argument("--budget", type=float)
    p.add_argument("--fleet-time", dest="fleet_time", type=float)
    p.add_argument("--detour-factor", dest="detour_factor", type=float)
    p.add_argument("--time-limits", dest="time_limits_path")
    p.add_argument("--left-turn-budget", dest="left_turn_budget", type=float)
    p.add_argument("--left-turn-band", dest="left_turn_band", type=_floats, metavar="LO,HI")
    p.add_argument("--fare-per-meter", dest="fare_per_meter", type=float)
    p.add_argument("--cost-per-meter", dest="cost_per_meter", type=float)
    p.add_argument("--robust-time", dest="robust_time_fraction", type=float, metavar="FRACTION")
    p.add_argument("--robust-demand", dest="robust_demand_fraction", type=float, metavar="FRACTION")
    p.add_argument("--robust-time-radius", dest="robust_time_radius_path")
    p.add_argument("--robust-demand-radius", dest="robust_demand_radius_path")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--columns-per-od", type=int)
    p.add_argument("--parallel-pricing", action="store_true", default=None)
    p.add_argument("--workers", type=int)
    p.add_argument("--gap", dest="rel_gap_target", type=float)
    p.add_argument("--node-limit", type=int)
    p.add_argument("--time-limit", type=float, help="MILP wall-clock limit in seconds")
    p.add_argument("-o", "--output", dest="output_dir")


_CG_FLAGS = ("epsilon", "max_iterations", "columns_per_od", "parallel_pricing", "workers")
_MIP_FLAGS = ("rel_gap_target", "node_limit", "time_limit")


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        data = io.load_json(args.config)
        if not isinstance(data, dict):
            raise ValidationError(f"{args.config}: expected a JSON object")
        cfg = config_from_mapping(data, cfg)
    simple = {f.name for f in dataclasses.fields(RunConfig)} - {"cg", "mip"}
    for name in simple:
        value = getattr(args, name, None)
        if value is not None:
            if name == "left_turn_band":
                if len(value) != 2:
                    raise ValidationError("left-turn band needs two numbers")
                value = tuple(value)
            setattr(cfg, name, value)
    cg = {k: getattr(args, k) for k in _CG_FLAGS if getattr(args, k, None) is not None}
    mip = {k: getattr(args, k) for k in _MIP_FLAGS if getattr(args, k, None) is not None}
    try:
        if cg:
            cfg.cg = dataclasses.replace(cfg.cg, **cg)
        if mip:
            cfg.mip = dataclasses.replace(cfg.mip, **mip)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="amodnd", description="Network design for autonomous mobility-on-demand.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="column generation plus integer recovery; writes solution files")
    _add_run_options(p)

    p = sub.add_parser("validate", help="check a solution JSON against an instance")
    _add_run_options(p)
    p.add_argument("solution", help="solution.json written by solve")

    p = sub.add_parser("oracle-check", help="compare the solver with brute-force enumeration (small instances)")
    _add_run_options(p)
    p.add_argument("--guard", type=int, default=14, help="maximum node count for enumeration")

    p = sub.add_parser("sensitivity", help="sweep fleet-time and budget limits")
    _add_run_options(p)
    p.add_argument("--fleet-fractions", type=_floats, default=list(DEFAULT_FRACTIONS))
    p.add_argument("--budget-fractions", type=_floats, default=list(DEFAULT_FRACTIONS))
    p.add_argument(
        "--cell-node-limit",
        type=int,
        default=CELL_NODE_LIMIT,
        help="tree-node cap per sweep cell; 0 lifts it",
    )

    p = sub.add_parser("export-geojson", help="write GeoJSON for an existing solution")
    _add_run_options(p)
    p.add_argument("solution")

    p = sub.add_parser("gen", help="write a seeded synthetic grid-city instance")
    p.add_argument("directory")
    p.add_argument("--rows", type=int, default=8)
    p.add_argument("--cols", type=int, default=8)
    p.add_argument("--ods", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--block", type=float, default=200.0, help="block length in meters")
    return parser


def _cmd_solve(args) -> int:
    cfg = config_from_args(args)
    result, paths = run_solve(cfg)
    print(json.dumps({"status": result.ip_solution.status, "J_LP": result.J_LP, "J_IP": result.J_IP,
                      "gap": result.gap, "solution": str(paths.solution)}))
    return EXIT_OK if result.ip_solution.status in ("optimal", "gap_limit") else EXIT_SOLVE


def _cmd_validate(args) -> int:
    cfg = config_from_args(args)
    inst = load_instance(cfg)
    report = validate_solution(inst, io.load_json(args.solution))
    print(json.dumps(report.as_dict(), indent=2, sort_keys=True))
    return EXIT_OK if report.passed else EXIT_INVALID


def _cmd_oracle(args) -> int:
    from .oracle import max_reduced_costs, solve_full_lp

    cfg = config_from_args(args)
    inst = load_instance(cfg)
    result = run_column_generation(inst, cfg.cg, cfg.mip)
    J_full, _, _ = solve_full_lp(inst, guard=args.guard)
    rc = max_reduced_costs(inst, result.duals, guard=args.guard)
    worst = max(rc.values(), default=-math.inf)
    lp_ok = abs(J_full - result.J_LP) <= 1e-6 * max(1.0, abs(J_full))
    rc_ok = worst <= cfg.cg.epsilon
    report = {
        "J_LP_colgen": result.J_LP,
        "J_LP_enumerated": J_full,
        "lp_match": lp_ok,
        "max_reduced_cost": io.json_number(worst),
        "pricing_certificate": rc_ok,
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK if lp_ok and rc_ok else EXIT_INVALID


def _cmd_sensitivity(args) -> int:
    cfg = config_from_args(args)
    path = run_sensitivity_cli(cfg, args.fleet_fractions, args.budget_fractions, args.cell_node_limit or None)
    print(json.dumps({"sensitivity": str(path)}))
    return EXIT_OK


def _cmd_export(args) -> int:
    cfg = config_from_args(args)
    inst = load_instance(cfg)
    doc = io.load_json(args.solution)
    out = io.ExportPaths.under(cfg.output_dir)
    Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
    net = inst.network
    try:
        edges = [int(item["edge"]) for item in doc["instrumented_edges"]]
        flows = {int(item["edge"]): float(item["y"]) for item in doc["edge_flows"]}
    except (KeyError, TypeError, ValueError) as exc:
        raise io.ParseError(args.solution, None, None, f"not a solution document: {exc}") from exc
    for eid in list(edges) + list(flows):
        if not 0 <= eid < net.num_edges:
            raise ValidationError(f"solution references unknown edge {eid}")
    io.dump_json(io.subnetwork_geojson(net, edges), out.subnetwork)
    io.dump_json(io.flows_geojson(net, flows), out.flows)
    print(json.dumps({"subnetwork": str(out.subnetwork), "flows": str(out.flows)}))
    return EXIT_OK


def _cmd_gen(args) -> int:
    spec = GridCitySpec(rows=args.rows, cols=args.cols, num_ods=args.ods, seed=args.seed, block_m=args.block)
    inst = grid_city(spec)
    io.write_instance(inst, args.directory)
    # the CSV files carry no time limits; this config reproduces them
    io.dump_json({"graph_path": args.directory, "detour_factor": spec.detour_factor}, Path(args.directory) / "config.json")
    print(json.dumps({"directory": args.directory, "nodes": inst.network.num_nodes,
                      "edges": inst.network.num_edges, "ods": len(inst.demands)}))
    return EXIT_OK


_COMMANDS = {
    "solve": _cmd_solve,
    "validate": _cmd_validate,
    "oracle-check": _cmd_oracle,
    "sensitivity": _cmd_sensitivity,
    "export-geojson": _cmd_export,
    "gen": _cmd_gen,
}


def _error(kind: str, message: str, code: int, **extra) -> int:
    print(json.dumps({"error": kind, "message": message, **extra}, sort_keys=True))
    return code


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except io.ParseError as exc:
        return _error("parse_error", str(exc), EXIT_INPUT, file=exc.path, line=exc.line, field=exc.field)
    except ValidationError as exc:
        return _error("validation_error", str(exc), EXIT_INPUT)
    except Exception as exc:  # anything else is a solver failure
        logger.debug("unhandled failure", exc_info=True)
        return _error(type(exc).__name__, str(exc), EXIT_SOLVE)


if __name__ == "__main__":
    sys.exit(main())
