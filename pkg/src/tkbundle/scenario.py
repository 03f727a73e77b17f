"""Declarative scenario files: charts, metrics, connections, maps and checks.

A scenario is a JSON object::

    {
      "name": "polar-cartesian",
      "backend": "float",
      "seed": 7,
      "charts": {"polar": {"dim": 2, "domain": [[0.5, 2], [-1.5, 1.5]]}},
      "metrics": {"gp": {"chart": "polar", "components": [["1", "0"], ["0", "x1^2"]]}},
      "connections": {"lc": {"chart": "polar", "type": "levi-civita", "metric": "gp"}},
      "maps": {"g": {"source": "polar", "target": "cart", "exprs": ["x1*cos(x2)", "x1*sin(x2)"]}},
      "checks": [{"check": "g-related-local", "map": "g", "source_connection": "lc",
                  "target_connection": "flat", "order": 3, "samples": 50}]
    }

A metric may also be declared as ``{"chart": c, "pullback": {"map": f,
"metric": h}}``.  Connection types are ``flat``, ``christoffel`` (``symbols[i][j][k]`` is the
``i``-th component of ``Gamma(e_j, e_k)``), ``levi-civita`` (of a declared
metric) and ``transported`` (a declared connection carried through a map).
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .connections import Christoffel, transport_christoffel
from .expr import BACKENDS, ExprError, MapSpec
from .metrics import ImmersionSpec, MetricField, levi_civita, pullback_metric

__all__ = ["ScenarioError", "Scenario", "load_scenario", "parse_scenario", "max_order"]

CONNECTION_TYPES = ("flat", "christoffel", "levi-civita", "transported")


class ScenarioError(ValueError):
    """A scenario failed to parse or validate; ``path`` locates the offending key."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
        self.message = message


def max_order():
    raw = os.environ.get("TKBUNDLE_MAX_ORDER", "8")
    try:
        value = int(raw)
    except ValueError:
        raise ScenarioError(f"TKBUNDLE_MAX_ORDER must be an integer, got {raw!r}") from None
    if value < 1:
        raise ScenarioError("TKBUNDLE_MAX_ORDER must be positive")
    return value


@dataclass
class Chart:
    name: str
    dim: int
    domain: tuple


@dataclass
class MapEntry:
    name: str
    source: str
    target: str
    spec: MapSpec
    inverse: MapSpec = None


@dataclass
class Scenario:
    name: str
    backend: str
    seed: int
    charts: dict
    metrics: dict
    connections: dict
    maps: dict
    checks: list
    raw: dict = field(default_factory=dict, repr=False)


def _require(obj, key, path, kind=None):
    if not isinstance(obj, dict):
        raise ScenarioError("expected an object", path)
    if key not in obj:
        raise ScenarioError(f"missing key {key!r}", path)
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        raise ScenarioError(f"expected {kind.__name__ if isinstance(kind, type) else kind}", f"{path}.{key}")
    return value


def _domain(raw, dim, path):
    if raw is None:
        return None
    if not isinstance(raw, list) or len(raw) != dim:
        raise ScenarioError(f"domain must list {dim} intervals", path)
    out = []
    for i, pair in enumerate(raw):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ScenarioError("interval must be [lo, hi]", f"{path}[{i}]")
        lo, hi = pair
        if not all(isinstance(v, (int, float, str)) for v in pair):
            raise ScenarioError("interval bounds must be numbers", f"{path}[{i}]")
        out.append((lo, hi))
    return tuple(out)


def _map_spec(sources, n, domain, backend, path):
    if not isinstance(sources, list) or not all(isinstance(s, str) for s in sources):
        raise ScenarioError("expected a list of expression strings", path)
    try:
        return MapSpec.parse(sources, n, domain, backend)
    except (ExprError, ValueError) as exc:
        raise ScenarioError(str(exc), path) from None


def _ref(table, name, what, path):
    if not isinstance(name, str) or name not in table:
        raise ScenarioError(f"undeclared {what} {name!r}", path)
    return table[name]


def parse_scenario(data: dict, name_hint="scenario") -> Scenario:
    """Validate a decoded scenario object and build its runtime pieces."""
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    name = data.get("name", name_hint)
    backend = data.get("backend", "float")
    if backend not in BACKENDS:
        raise ScenarioError(f"unknown backend {backend!r}", "backend")
    seed = data.get("seed", 0)
    if not isinstance(seed, int):
        raise ScenarioError("seed must be an integer", "seed")

    charts = {}
    for cname, c in _require(data, "charts", "", dict).items():
        path = f"charts.{cname}"
        dim = _require(c, "dim", path, int)
        if dim < 1:
            raise ScenarioError("dimension must be positive", f"{path}.dim")
        charts[cname] = Chart(cname, dim, _domain(c.get("domain"), dim, f"{path}.domain"))

    metrics = {}
    raw_metrics = data.get("metrics", {})
    for mname, m in raw_metrics.items():
        path = f"metrics.{mname}"
        chart = _ref(charts, _require(m, "chart", path), "chart", f"{path}.chart")
        if "pullback" in m:
            continue
        comps = _require(m, "components", path, list)
        try:
            metrics[mname] = MetricField.from_exprs(comps, chart.dim, chart.domain, backend, name=mname)
        except (ExprError, ValueError) as exc:
            raise ScenarioError(str(exc), f"{path}.components") from None
        metrics[mname].chart = chart.name

    maps = {}
    for gname, g in data.get("maps", {}).items():
        path = f"maps.{gname}"
        src = _ref(charts, _require(g, "source", path), "chart", f"{path}.source")
        tgt = _ref(charts, _require(g, "target", path), "chart", f"{path}.target")
        spec = _map_spec(_require(g, "exprs", path), src.dim, src.domain, backend, f"{path}.exprs")
        if spec.m != tgt.dim:
            raise ScenarioError(f"map has {spec.m} outputs but chart {tgt.name!r} has dimension {tgt.dim}",
                                f"{path}.exprs")
        inverse = None
        if "inverse" in g:
            inverse = _map_spec(g["inverse"], tgt.dim, tgt.domain, backend, f"{path}.inverse")
        maps[gname] = MapEntry(gname, src.name, tgt.name, spec, inverse)

    for mname, m in raw_metrics.items():
        if "pullback" not in m:
            continue
        path = f"metrics.{mname}.pullback"
        pb = m["pullback"]
        entry = _ref(maps, _require(pb, "map", path), "map", f"{path}.map")
        ambient = _ref(metrics, _require(pb, "metric", path), "metric", f"{path}.metric")
        if entry.source != m["chart"]:
            raise ScenarioError("map source differs from the metric's chart", f"{path}.map")
        if ambient.chart != entry.target:
            raise ScenarioError("ambient metric does not live on the map's target chart", f"{path}.metric")
        try:
            metric = pullback_metric(ImmersionSpec(entry.spec, ambient))
        except ValueError as exc:
            raise ScenarioError(str(exc), path) from None
        metric.name = mname
        metric.chart = m["chart"]
        metrics[mname] = metric

    connections = {}
    pending = dict(data.get("connections", {}))
    # transported connections may refer to others; resolve in dependency order
    for _ in range(len(pending) + 1):
        progressed = False
        for cname, c in list(pending.items()):
            path = f"connections.{cname}"
            kind = _require(c, "type", path)
            if kind not in CONNECTION_TYPES:
                raise ScenarioError(f"unknown connection type {kind!r}", f"{path}.type")
            if kind == "transported":
                src_name = _require(c, "from", path)
                if src_name in pending and src_name != cname:
                    continue
                src = _ref(connections, src_name, "connection", f"{path}.from")
                entry = _ref(maps, _require(c, "map", path), "map", f"{path}.map")
                if entry.source != src.chart:
                    raise ScenarioError("map source chart differs from the connection's chart", f"{path}.map")
                conn = transport_christoffel(src, entry.spec, entry.inverse, name=cname)
                conn.chart = entry.target
            else:
                chart = _ref(charts, _require(c, "chart", path), "chart", f"{path}.chart")
                if kind == "flat":
                    conn = Christoffel.flat(chart.dim)
                elif kind == "levi-civita":
                    metric = _ref(metrics, _require(c, "metric", path), "metric", f"{path}.metric")
                    if metric.chart != chart.name:
                        raise ScenarioError("metric lives on a different chart", f"{path}.metric")
                    conn = levi_civita(metric)
                else:
                    symbols = _require(c, "symbols", path, list)
                    try:
                        conn = Christoffel.from_exprs(symbols, chart.dim, chart.domain, backend,
                                                      symmetric=c.get("symmetric"), name=cname)
                    except (ExprError, ValueError, IndexError, TypeError) as exc:
                        raise ScenarioError(f"bad symbol array: {exc}", f"{path}.symbols") from None
                conn.chart = chart.name
            conn.name = cname
            connections[cname] = conn
            del pending[cname]
            progressed = True
        if not pending:
            break
        if not progressed:
            cname = next(iter(pending))
            raise ScenarioError("circular 'transported' references", f"connections.{cname}.from")

    checks = _require(data, "checks", "", list)
    for i, chk in enumerate(checks):
        path = f"checks[{i}]"
        _require(chk, "check", path, str)
    scenario = Scenario(name, backend, seed, charts, metrics, connections, maps, checks, data)
    return scenario


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_scenario(data, path.stem)
