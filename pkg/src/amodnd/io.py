"""CSV instance files, solution documents and GeoJSON export."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping

from .master import OD, Demand, Instance
from .network import Edge, Network, Node

logger = logging.getLogger(__name__)

NODE_FIELDS = ("id", "lat", "lon")
EDGE_FIELDS = ("src", "dst", "travel_time_s", "length_m", "capacity", "build_cost", "beta")
DEMAND_FIELDS = ("origin", "dest", "alpha")
TIME_LIMIT_FIELDS = ("origin", "dest", "time_limit_s")
EDGE_RADIUS_FIELDS = ("edge", "radius_s")
DEMAND_RADIUS_FIELDS = ("origin", "dest", "radius")


class ParseError(ValueError):
    def __init__(self, path: str | Path, line: int | None, field: str | None, message: str):
        self.path, self.line, self.field = str(path), line, field
        where = f"{path}" + (f":{line}" if line is not None else "") + (f" [{field}]" if field else "")
        super().__init__(f"{where}: {message}")

    def as_dict(self) -> dict:
        return {"file": self.path, "line": self.line, "field": self.field, "message": str(self)}


def _rows(path: Path, required: Iterable[str]) -> Iterable[tuple[int, dict[str, str]]]:
    """Yield (line number, row) pairs; the header is line 1."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(path, None, None, f"cannot open: {exc.strerror}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError(path, 1, None, "missing header row")
        header = [h.strip() for h in reader.fieldnames]
        reader.fieldnames = header
        missing = [f for f in required if f not in header]
        if missing:
            raise ParseError(path, 1, missing[0], f"missing column(s) {', '.join(missing)}")
        for row in reader:
            if not any((v or "").strip() for v in row.values() if isinstance(v, str)):
                continue
            yield reader.line_num, row


def _field(path: Path, line: int, row: Mapping[str, str], name: str, kind=float, optional: bool = False):
    raw = (row.get(name) or "").strip()
    if raw == "":
        if optional:
            return None
        raise ParseError(path, line, name, "empty value")
    try:
        value = kind(raw)
    except ValueError:
        raise ParseError(path, line, name, f"not a valid {kind.__name__}: {raw!r}") from None
    if kind is float and not math.isfinite(value):
        raise ParseError(path, line, name, f"non-finite value {raw!r}")
    return value


def read_nodes(path: str | Path) -> list[Node]:
    path = Path(path)
    return [
        Node(_field(path, ln, r, "id", int), _field(path, ln, r, "lat"), _field(path, ln, r, "lon"))
        for ln, r in _rows(path, NODE_FIELDS)
    ]


def read_edges(
    path: str | Path, fare_per_meter: float | None = None, cost_per_meter: float | None = None
) -> list[Edge]:
    """Edges in file order; ids are assigned 0, 1, ... by row.

    A missing or empty ``beta`` is derived as (fare - cost) per meter times length.
    """
    path = Path(path)
    edges = []
    for ln, r in _rows(path, EDGE_FIELDS[:-1]):
        length = _field(path, ln, r, "length_m")
        beta = _field(path, ln, r, "beta", optional=True)
        if beta is None:
            if fare_per_meter is None or cost_per_meter is None:
                raise ParseError(path, ln, "beta", "no beta given and no fare/cost rates configured")
            beta = (fare_per_meter - cost_per_meter) * length
        edges.append(
            Edge(
                id=len(edges),
                src=_field(path, ln, r, "src", int),
                dst=_field(path, ln, r, "dst", int),
                travel_time=_field(path, ln, r, "travel_time_s"),
                length=length,
                capacity=_field(path, ln, r, "capacity"),
                build_cost=_field(path, ln, r, "build_cost"),
                profit_rate=beta,
            )
        )
    return edges


def read_demands(path: str | Path) -> list[Demand]:
    """Demand rows; rows with origin == dest or alpha <= 0 are skipped with a warning."""
    path = Path(path)
    out: dict[OD, Demand] = {}
    for ln, r in _rows(path, DEMAND_FIELDS):
        o, d = _field(path, ln, r, "origin", int), _field(path, ln, r, "dest", int)
        alpha = _field(path, ln, r, "alpha")
        if o == d:
            logger.warning("%s:%d: origin equals destination (%d); row skipped", path, ln, o)
            continue
        if alpha <= 0:
            logger.warning("%s:%d: nonpositive demand %g for (%d,%d); row skipped", path, ln, alpha, o, d)
            continue
        if (o, d) in out:
            raise ParseError(path, ln, "origin", f"duplicate OD ({o},{d})")
        out[(o, d)] = Demand(o, d, alpha)
    return list(out.values())


def read_od_table(path: str | Path, value_field: str) -> dict[OD, float]:
    path = Path(path)
    table = {}
    for ln, r in _rows(path, ("origin", "dest", value_field)):
        od = (_field(path, ln, r, "origin", int), _field(path, ln, r, "dest", int))
        if od in table:
            raise ParseError(path, ln, "origin", f"duplicate OD {od}")
        table[od] = _field(path, ln, r, value_field)
    return table


def read_edge_radii(path: str | Path) -> dict[int, float]:
    path = Path(path)
    return {_field(path, ln, r, "edge", int): _field(path, ln, r, "radius_s") for ln, r in _rows(path, EDGE_RADIUS_FIELDS)}


def write_csv(path: str | Path, header: Iterable[str], rows: Iterable[Iterable[Any]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(header))
        for row in rows:
            w.writerow([_csv_value(v) for v in row])


def _csv_value(v):
    if isinstance(v, float):
        v = float(v)  # plain repr for numpy scalars too
        return repr(v) if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return "" if v is None else v


def write_instance(inst: Instance, directory: str | Path) -> None:
    """nodes.csv, edges.csv and demand.csv for ``inst`` (beta always written)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    net = inst.network
    write_csv(directory / "nodes.csv", NODE_FIELDS, ((n.id, n.lat, n.lon) for n in net.nodes))
    write_csv(
        directory / "edges.csv",
        EDGE_FIELDS,
        ((e.src, e.dst, e.travel_time, e.length, e.capacity, e.build_cost, e.profit_rate) for e in net.edges),
    )
    write_csv(directory / "demand.csv", DEMAND_FIELDS, ((d.origin, d.dest, d.alpha) for d in inst.demands))


# --- JSON ------------------------------------------------------------------


def json_number(x: float) -> float | str:
    """JSON has no infinities; encode them as strings."""
    x = float(x)
    if math.isfinite(x):
        return x
    return "inf" if x > 0 else "-inf" if x < 0 else "nan"


def parse_number(x) -> float:
    if x is None:
        return math.inf
    return float(x)


def dump_json(obj, path: str | Path) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_json(path: str | Path) -> Any:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(path, None, None, f"cannot open: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.lineno, None, exc.msg) from exc


# --- GeoJSON ---------------------------------------------------------------


def _line(net: Network, e: Edge, props: dict) -> dict:
    a, b = net.nodes[e.src], net.nodes[e.dst]
    return {
        "type": "Feature",
        "geometry": {"type": "LineString", "coordinates": [[a.lon, a.lat], [b.lon, b.lat]]},
        "properties": props,
    }


def subnetwork_geojson(net: Network, instrumented: Iterable[int]) -> dict:
    feats = []
    for eid in sorted(instrumented):
        e = net.edges[eid]
        feats.append(
            _line(net, e, {"edge": e.id, "src": e.src, "dst": e.dst, "capacity": e.capacity, "build_cost": e.build_cost})
        )
    return {"type": "FeatureCollection", "features": feats}


def flows_geojson(net: Network, edge_flows: Mapping[int, float]) -> dict:
    feats = []
    for eid in sorted(edge_flows):
        e = net.edges[eid]
        y = float(edge_flows[eid])
        feats.append(
            _line(net, e, {"edge": e.id, "src": e.src, "dst": e.dst, "y": y, "utilization": y / e.capacity})
        )
    return {"type": "FeatureCollection", "features": feats}


@dataclass(frozen=True)
class ExportPaths:
    solution: Path
    timings: Path
    subnetwork: Path
    flows: Path
    iterations: Path

    @classmethod
    def under(cls, directory: str | Path) -> "ExportPaths":
        d = Path(directory)
        return cls(
            solution=d / "solution.json",
            timings=d / "timings.json",
            subnetwork=d / "subnetwork.geojson",
            flows=d / "flows.geojson",
            iterations=d / "iterations.csv",
        )
