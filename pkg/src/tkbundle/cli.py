"""Command line entry point: ``tkbundle run`` and ``tkbundle list-checks``."""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from . import metrics, morphisms, oracle, trivialization
from .connections import lift_connection, transport_christoffel
from .jets import NaturalJet
from .report import CheckRecord, Report, Residual
from .sampling import DEFAULT_SEED, sample_blocks, sample_point, sample_vector
from .scenario import ScenarioError, load_scenario, max_order, parse_scenario

__all__ = ["REGISTRY", "main", "run_scenario", "bundled_scenarios", "list_checks"]


@dataclass(frozen=True)
class CheckSpec:
    name: str
    operation: Callable
    description: str
    prepare: Callable
    order: int = 2
    samples: int = 20
    tolerance: float = 1e-6


# -- reference resolution ------------------------------------------------------

def _get(scn, chk, path, key, table, what, default=None, optional=False):
    if key not in chk:
        if optional:
            return default
        raise ScenarioError(f"missing key {key!r}", path)
    name = chk[key]
    if not isinstance(name, str) or name not in table:
        raise ScenarioError(f"undeclared {what} {name!r}", f"{path}.{key}")
    return table[name]


def _map(scn, chk, path):
    return _get(scn, chk, path, "map", scn.maps, "map")


def _conn(scn, chk, path, key, chart, optional=False):
    conn = _get(scn, chk, path, key, scn.connections, "connection", optional=optional)
    if conn is not None and conn.chart != chart:
        raise ScenarioError(f"connection lives on chart {conn.chart!r}, expected {chart!r}",
                            f"{path}.{key}")
    return conn


def _metric(scn, chk, path, chart):
    metric = _get(scn, chk, path, "metric", scn.metrics, "metric")
    if metric.chart != chart:
        raise ScenarioError(f"metric lives on chart {metric.chart!r}, expected {chart!r}",
                            f"{path}.metric")
    return metric


def _domain(scn, chart):
    c = scn.charts[chart]
    return c.domain or tuple((-1, 1) for _ in range(c.dim))


def _merge(name, k, records, tolerance):
    res = Residual()
    for r in records:
        res.max_abs = max(res.max_abs, r.max_abs_residual)
        res.max_rel = max(res.max_rel, r.max_rel_residual)
        res.exact_zero = res.exact_zero and r.passed and r.max_abs_residual == 0
    return res.record(name, k, len(records), tolerance)


# -- per-check preparation: returns a thunk (k, samples, tol, rng) -> CheckRecord ----

def _prep_transition(scn, chk, path):
    g = _map(scn, chk, path)
    src = _conn(scn, chk, path, "source_connection", g.source)
    tgt = _conn(scn, chk, path, "target_connection", g.target, optional=True)
    if tgt is None:
        tgt = transport_christoffel(src, g.spec, g.inverse)

    def run(k, samples, tol, rng):
        return trivialization.transition_check(lift_connection(src, k), lift_connection(tgt, k),
                                               g.spec, k, samples, rng, tol)
    return run


def _prep_round_trip(scn, chk, path):
    conn = _get(scn, chk, path, "connection", scn.connections, "connection")
    dom = _domain(scn, conn.chart)

    def run(k, samples, tol, rng):
        return trivialization.round_trip_check(lift_connection(conn, k), conn.n, k, samples,
                                               rng, dom, scn.backend, tol)
    return run


def _prep_convex(scn, chk, path):
    first = _get(scn, chk, path, "connection", scn.connections, "connection")
    second = _conn(scn, chk, path, "second_connection", first.chart)
    from fractions import Fraction
    lams = chk.get("lambdas", ["0", "1/4", "1/2", "1"])
    try:
        lams = [Fraction(str(v)) for v in lams]
    except (ValueError, TypeError):
        raise ScenarioError("lambdas must be numbers or 'p/q' strings", f"{path}.lambdas") from None
    if scn.backend == "float":
        lams = [float(v) for v in lams]
    dom = _domain(scn, first.chart)

    def run(k, samples, tol, rng):
        return trivialization.convex_fibre_check(lift_connection(first, k), lift_connection(second, k),
                                                 lams, first.n, k, samples, rng, dom,
                                                 scn.backend, tol)
    return run


def _morphism(scn, chk, path):
    g = _map(scn, chk, path)
    src = _conn(scn, chk, path, "source_connection", g.source)
    tgt = _conn(scn, chk, path, "target_connection", g.target)
    return g, src, tgt


def _prep_related(op):
    def prep(scn, chk, path):
        g, src, tgt = _morphism(scn, chk, path)

        def run(k, samples, tol, rng):
            s = morphisms.MorphismScenario(g.spec, lift_connection(src, k), lift_connection(tgt, k), k)
            return op(s, samples, rng, tol)
        return run
    return prep


def _prep_lifted_relatedness(scn, chk, path):
    g, src, tgt = _morphism(scn, chk, path)

    def run(k, samples, tol, rng):
        return morphisms.verify_lifted_relatedness(src, tgt, g.spec, k, samples, rng, tol)
    return run


def _prep_projective(scn, chk, path):
    g = _map(scn, chk, path)
    src = _conn(scn, chk, path, "source_connection", g.source, optional=True)
    tgt = _conn(scn, chk, path, "target_connection", g.target, optional=True)
    if (src is None) != (tgt is None):
        raise ScenarioError("give both source_connection and target_connection or neither", path)

    def run(k, samples, tol, rng):
        if k < 2:
            raise ScenarioError("projective consistency needs order >= 2", f"{path}.order")
        jets = [NaturalJet(sample_point(rng, g.spec.domain, scn.backend),
                           sample_blocks(rng, g.spec.n, k, scn.backend)) for _ in range(samples)]
        lifted = {}
        if src is not None:
            lifted = dict(source=lift_connection(src, k), target=lift_connection(tgt, k))
        return morphisms.check_projective_consistency(g.spec, jets, tolerance=tol, **lifted)
    return run


def _prep_gauss(scn, chk, path):
    g = _map(scn, chk, path)
    h = _metric(scn, chk, path, g.target)
    require_full = bool(chk.get("require_full", False))

    def run(k, samples, tol, rng):
        rec = metrics.gauss_residual(metrics.ImmersionSpec(g.spec, h), samples, rng, tol)
        if require_full and not rec.details["full_related"]:
            return replace(rec, passed=False,
                           diagnostic="full residual exceeds tolerance (normal component present)")
        return rec
    return run


def _prep_isometry(scn, chk, path):
    g = _map(scn, chk, path)
    if g.source != g.target:
        raise ScenarioError("lifted-isometry needs a map from a chart to itself", f"{path}.map")
    metric = _metric(scn, chk, path, g.source)

    def run(k, samples, tol, rng):
        return metrics.lifted_metric_residual(metric, g.spec, k, samples, rng, tol)
    return run


def _prep_koszul(scn, chk, path):
    metric = _get(scn, chk, path, "metric", scn.metrics, "metric")
    dom = _domain(scn, metric.chart)

    def run(k, samples, tol, rng):
        return metrics.koszul_check(metric, samples, rng, dom, scn.backend, tol)
    return run


def _prep_lemma_a1(scn, chk, path):
    g = _map(scn, chk, path)
    conn = _conn(scn, chk, path, "connection", g.source, optional=True)

    def run(k, samples, tol, rng):
        if k < 2:
            raise ScenarioError("lemma-A1 needs order >= 2", f"{path}.order")
        C = lift_connection(conn, k) if conn is not None else None
        if C is None:
            from .connections import Christoffel
            C = lift_connection(Christoffel.flat(g.spec.n), k)
        recs = []
        for _ in range(samples):
            x = sample_point(rng, g.spec.domain, "exact")
            recs.append(oracle.lemma_A1_check(g.spec, C, x, sample_blocks(rng, g.spec.n, k, "exact"), k))
        return _merge("lemma-A1", k, recs, 0)
    return run


def _prep_lemma_a2(scn, chk, path):
    g = _map(scn, chk, path)

    def run(k, samples, tol, rng):
        recs = []
        for _ in range(samples):
            x = sample_point(rng, g.spec.domain, "exact")
            y = sample_vector(rng, g.spec.n, "exact")
            xis = sample_blocks(rng, g.spec.n, k, "exact")
            recs.append(oracle.lemma_A2_check(g.spec, x, y, xis, range(1, k + 1), k))
        return _merge("lemma-A2", k, recs, 0)
    return run


_SPECS = [
    CheckSpec("transition-linearity", trivialization.transition_check,
              "lifted chart transitions are linear, block-diagonal with blocks dphi(x)",
              _prep_transition, order=3, tolerance=1e-8),
    CheckSpec("round-trip", trivialization.round_trip_check,
              "trivialize and the inverse-curve construction undo each other",
              _prep_round_trip, order=3, tolerance=1e-9),
    CheckSpec("convex-fibre", trivialization.convex_fibre_check,
              "fibre coordinates of a convex combination of connection maps combine affinely",
              _prep_convex, order=3, tolerance=1e-9),
    CheckSpec("g-related-global", morphisms.check_g_related_global,
              "connection maps commute with TT^k g (chain rule on a moving jet)",
              _prep_related(morphisms.check_g_related_global), order=2),
    CheckSpec("g-related-local", morphisms.check_g_related_local,
              "blockwise local compatibility along the auxiliary two-parameter curve",
              _prep_related(morphisms.check_g_related_local), order=2),
    CheckSpec("lifted-relatedness", morphisms.verify_lifted_relatedness,
              "lifts of g-related connections stay g-related, order-1 hypothesis gate first",
              _prep_lifted_relatedness, order=3),
    CheckSpec("fibre-linearity", morphisms.check_fibre_linearity,
              "T^k g is fibre linear in lifted coordinates with blocks dg(x)",
              _prep_related(morphisms.check_fibre_linearity), order=3),
    CheckSpec("projective-consistency", morphisms.check_projective_consistency,
              "truncation to lower order commutes with T^k g, natural and lifted",
              _prep_projective, order=5, tolerance=1e-8),
    CheckSpec("gauss-residual", metrics.gauss_residual,
              "projected Gauss identity of an immersion, full normal residual reported",
              _prep_gauss, order=1, tolerance=1e-8),
    CheckSpec("lifted-isometry", metrics.lifted_metric_residual,
              "isometries preserve the direct-sum metric on T^kM, order-1 isometry gate first",
              _prep_isometry, order=3, tolerance=1e-7),
    CheckSpec("koszul", metrics.koszul_check,
              "Levi-Civita symbols are torsion-free and metric compatible",
              _prep_koszul, order=1, tolerance=1e-7),
    CheckSpec("lemma-A1", oracle.lemma_A1_check,
              "mixed s,t-derivative along the curve built from mu equals (f o mu)^(k)(0)",
              _prep_lemma_a1, order=4, samples=10, tolerance=0),
    CheckSpec("lemma-A2", oracle.lemma_A2_check,
              "h-derivative of the summed shifted curves equals the t-derivative of f o c",
              _prep_lemma_a2, order=4, samples=10, tolerance=0),
]

REGISTRY = {spec.name: spec for spec in _SPECS}


def list_checks() -> str:
    ops = {spec.name: f"{spec.operation.__module__}.{spec.operation.__name__}" for spec in _SPECS}
    w1 = max(len(n) for n in ops)
    w2 = max(len(o) for o in ops.values())
    return "\n".join(f"{spec.name:<{w1}}  {ops[spec.name]:<{w2}}  {spec.description}"
                     for spec in _SPECS)


# -- running ------------------------------------------------------------------

def bundled_scenarios():
    root = resources.files("tkbundle") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def resolve_scenario(ref):
    path = Path(ref)
    if path.exists():
        return load_scenario(path)
    if ref in bundled_scenarios():
        import json
        text = (resources.files("tkbundle") / "scenarios" / f"{ref}.json").read_text(encoding="utf-8")
        return parse_scenario(json.loads(text), ref)
    raise ScenarioError(f"no scenario file or bundled scenario named {ref!r}")


def _positive_int(chk, key, default, path):
    value = chk.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ScenarioError(f"{key} must be a positive integer", f"{path}.{key}")
    return value


def run_scenario(scn, order=None, samples=None, seed=None, tolerance=None, only=None) -> Report:
    """Validate every check first, then execute them in declaration order."""
    cap = max_order()
    base_seed = seed if seed is not None else scn.seed if scn.raw.get("seed") is not None else DEFAULT_SEED
    plan = []
    for i, chk in enumerate(scn.checks):
        path = f"checks[{i}]"
        name = chk["check"]
        if name not in REGISTRY:
            raise ScenarioError(f"unknown check {name!r}", f"{path}.check")
        spec = REGISTRY[name]
        k = order if order is not None else _positive_int(chk, "order", spec.order, path)
        if k > cap:
            raise ScenarioError(f"order {k} exceeds the configured maximum {cap}", f"{path}.order")
        n = samples if samples is not None else _positive_int(chk, "samples", spec.samples, path)
        tol = tolerance if tolerance is not None else chk.get("tolerance", spec.tolerance)
        if not isinstance(tol, (int, float)) or tol < 0:
            raise ScenarioError("tolerance must be a non-negative number", f"{path}.tolerance")
        thunk = spec.prepare(scn, chk, path)
        if only is None or name == only:
            plan.append((i, name, k, n, tol, thunk))
    report = Report(scn.name)
    for i, name, k, n, tol, thunk in plan:
        rng = np.random.default_rng([base_seed, i])
        try:
            rec = thunk(k, n, tol, rng)
        except ScenarioError:
            raise
        except (ArithmeticError, ValueError) as exc:
            rec = CheckRecord(name, k, n, float("nan"), float("nan"), tol, False,
                              diagnostic=f"error: {exc}")
        report.add(rec)
    return report


def _build_parser():
    parser = argparse.ArgumentParser(prog="tkbundle",
                                     description="Checks for higher-order tangent bundle constructions.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the checks of a scenario file or bundled scenario")
    run.add_argument("scenario", help="path to a JSON scenario, or a bundled scenario name")
    run.add_argument("--order", type=int, help="override every check's order k")
    run.add_argument("--samples", type=int, help="override every check's sample count")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--tolerance", type=float, help="override float tolerances")
    run.add_argument("--json", metavar="PATH", help="write line-delimited JSON records ('-' for stdout)")
    run.add_argument("--only", metavar="CHECK", help="run only checks with this name")
    sub.add_parser("list-checks", help="list the available check names")
    sub.add_parser("list-scenarios", help="list the bundled scenarios")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "list-checks":
        print(list_checks())
        return 0
    if args.command == "list-scenarios":
        print("\n".join(bundled_scenarios()))
        return 0
    try:
        if args.only is not None and args.only not in REGISTRY:
            raise ScenarioError(f"unknown check {args.only!r}", "--only")
        if args.order is not None and args.order < 1:
            raise ScenarioError("order must be positive", "--order")
        if args.samples is not None and args.samples < 1:
            raise ScenarioError("samples must be positive", "--samples")
        scn = resolve_scenario(args.scenario)
        report = run_scenario(scn, args.order, args.samples, args.seed, args.tolerance, args.only)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.json == "-":
        sys.stdout.write(report.jsonl())
    else:
        print(report.text())
        if args.json:
            Path(args.json).write_text(report.jsonl(), encoding="utf-8")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
