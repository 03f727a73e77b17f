"""The k-th order differential T^k g and compatibility of connections along g."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import series as S
from .connections import (
    Christoffel,
    ConnectionComponents,
    apply_connection_map,
    lift_connection,
)
from .expr import MapSpec, derivative_tower, jacobian
from .jets import NaturalJet, TangentOfTk, compose_jet, truncate
from .report import CheckRecord, Residual
from .sampling import draw, sample_blocks, sample_point, sample_vector
from .trivialization import LiftedCoordinates, detrivialize, trivialize

__all__ = [
    "MorphismScenario",
    "pushforward_natural",
    "pushforward_lifted",
    "tangent_pushforward",
    "auxiliary_pushforward",
    "check_g_related_global",
    "check_g_related_local",
    "verify_lifted_relatedness",
    "check_projective_consistency",
    "check_fibre_linearity",
]

DEFAULT_TOL = 1e-6


@dataclass(frozen=True)
class MorphismScenario:
    """A chart representation ``g`` with connection components on both sides."""

    g: MapSpec
    source: ConnectionComponents
    target: ConnectionComponents
    k: int
    inverse: MapSpec = None

    def __post_init__(self):
        if self.source.n != self.g.n or self.target.n != self.g.m:
            raise ValueError("connection dimensions do not match the map")
        if self.k < 1:
            raise ValueError("order k must be at least 1")
        if min(self.source.order, self.target.order) < self.k:
            raise ValueError(f"connection components do not reach order {self.k}")

    @property
    def backend(self):
        return self.g.backend

    def tolerance(self, tolerance):
        return 0 if self.backend == "exact" else tolerance


def _vec(v):
    return np.asarray(v, dtype=object)


def pushforward_natural(g: MapSpec, j: NaturalJet) -> NaturalJet:
    """``[gamma, x]_k -> [g o gamma, g(x)]_k`` through the derivative tower of ``g``."""
    return compose_jet(derivative_tower(g, j.base, j.order), j)


def pushforward_lifted(s: MorphismScenario, L: LiftedCoordinates) -> LiftedCoordinates:
    """T^k g in the connection charts on both sides."""
    j = detrivialize(s.source, L)
    return trivialize(s.target, pushforward_natural(s.g, j))


def _split_s(values, name):
    return (tuple(S.coefficient(v, name, 0) for v in values),
            tuple(S.coefficient(v, name, 1) for v in values))


def tangent_pushforward(g: MapSpec, t: TangentOfTk) -> TangentOfTk:
    """TT^k g on a tangent vector, by differentiating T^k g along ``u + s (y, eta)``."""
    name = S.fresh_name("s")
    sv = S.variable(name, 1)
    u = t.u
    base = tuple(a + sv * b for a, b in zip(u.base, t.y))
    comps = [tuple(a + sv * b for a, b in zip(c, e)) for c, e in zip(u.comps, t.etas)]
    image = pushforward_natural(g, NaturalJet(base, comps))
    b0, y_bar = _split_s(image.base, name)
    comps0, etas = zip(*(_split_s(c, name) for c in image.comps))
    return TangentOfTk(NaturalJet(b0, comps0), y_bar, etas)


def auxiliary_pushforward(g: MapSpec, t: TangentOfTk) -> TangentOfTk:
    """Barred data from ``g`` composed with ``c(t, s) = x + s y + sum t^i (xi_i + s eta_i)``.

    Coefficients of ``t^i s^0``, ``s t^0`` and ``t^i s`` give the image jet,
    ``y_bar`` and ``eta_bar_i``.
    """
    k = t.order
    tn, sn = S.fresh_name("t"), S.fresh_name("s")
    tv, sv = S.variable(tn, k), S.variable(sn, 1)
    point = []
    for a in range(g.n):
        acc = t.u.base[a] + sv * t.y[a]
        for i in range(1, k + 1):
            acc = acc + tv**i * (t.u.comps[i - 1][a] + sv * t.etas[i - 1][a])
        point.append(acc)
    values = g(point)

    def coeff(v, i, p):
        return S.coefficient(S.coefficient(v, tn, i), sn, p)

    u_bar = NaturalJet(tuple(coeff(v, 0, 0) for v in values),
                       [tuple(coeff(v, i, 0) for v in values) for i in range(1, k + 1)])
    y_bar = tuple(coeff(v, 0, 1) for v in values)
    etas = [tuple(coeff(v, i, 1) for v in values) for i in range(1, k + 1)]
    return TangentOfTk(u_bar, y_bar, etas)


def _sample_tangent(s, rng, margin=0.05):
    g = s.g
    x = sample_point(rng, g.domain, g.backend, margin)
    u = NaturalJet(x, sample_blocks(rng, g.n, s.k, g.backend))
    return TangentOfTk(u, sample_vector(rng, g.n, g.backend), sample_blocks(rng, g.n, s.k, g.backend))


def _relatedness(s, samples, rng, tolerance, push, name):
    res = Residual()
    per_block = [Residual() for _ in range(s.k)]
    for _ in range(samples):
        t = _sample_tangent(s, rng)
        J = jacobian(s.g, t.u.base)
        rhs = [J.dot(_vec(b)) for b in apply_connection_map(s.source, t).blocks]
        lhs = apply_connection_map(s.target, push(s.g, t)).blocks
        for i, (a, b) in enumerate(zip(lhs, rhs)):
            res.update(a, b)
            per_block[i].update(a, b)
    details = {f"block_{i + 1}_abs": r.max_abs for i, r in enumerate(per_block)}
    return res.record(name, s.k, samples, s.tolerance(tolerance), details=details)


def check_g_related_global(s: MorphismScenario, samples: int, rng,
                           tolerance=DEFAULT_TOL) -> CheckRecord:
    """``K_N o TT^k g = (+) Tg o K_M`` with TT^k g obtained from the chain rule on jets."""
    return _relatedness(s, samples, rng, tolerance, tangent_pushforward, "g-related-global")


def check_g_related_local(s: MorphismScenario, samples: int, rng,
                          tolerance=DEFAULT_TOL) -> CheckRecord:
    """Per-block local compatibility, with barred data read off the auxiliary curve."""
    return _relatedness(s, samples, rng, tolerance, auxiliary_pushforward, "g-related-local")


def verify_lifted_relatedness(gamma_m: Christoffel, gamma_n: Christoffel, g: MapSpec,
                              k: int, samples: int, rng,
                              tolerance=DEFAULT_TOL) -> CheckRecord:
    """Lift both connections and test relatedness order by order.

    Order 1 is the hypothesis.  If it fails the check stops there and says
    so; a failure at a higher order means the conclusion itself broke.
    """
    worst = Residual()
    details = {}
    state = rng.bit_generator.state
    for order in range(1, k + 1):
        rng.bit_generator.state = state
        s = MorphismScenario(g, lift_connection(gamma_m, order), lift_connection(gamma_n, order), order)
        rec = check_g_related_local(s, samples, rng, tolerance)
        details[f"order_{order}_abs"] = rec.max_abs_residual
        details[f"order_{order}_rel"] = rec.max_rel_residual
        worst.max_abs = max(worst.max_abs, rec.max_abs_residual)
        worst.max_rel = max(worst.max_rel, rec.max_rel_residual)
        worst.exact_zero = worst.exact_zero and rec.max_abs_residual == 0
        if not rec.passed:
            if order == 1:
                diag = ("hypothesis violated: base connections are not g-related "
                        f"(order 1 residual {rec.max_rel_residual:.3e}); higher orders not run")
            else:
                diag = f"conclusion violated at order {order}"
            out = worst.record("lifted-relatedness", k, samples, rec.tolerance,
                               details=details, diagnostic=diag)
            return CheckRecord(**{**out.__dict__, "passed": False})
    return worst.record("lifted-relatedness", k, samples,
                        0 if g.backend == "exact" else tolerance, details=details)


def check_projective_consistency(g: MapSpec, jets, source=None, target=None,
                                 tolerance=1e-8) -> CheckRecord:
    """Truncation commutes with the pushforward, for every order below each jet's.

    With ``source`` and ``target`` components the same is checked in lifted
    coordinates, reading each jet's components as fibre coordinates.
    """
    jets = list(jets)
    jmax = max(j.order for j in jets)
    if jmax < 2:
        raise ValueError("projective consistency needs order at least 2")
    res = Residual()
    lifted = source is not None and target is not None
    for j in jets:
        full = pushforward_natural(g, j)
        for i in range(1, j.order + 1):
            a = truncate(full, i)
            b = pushforward_natural(g, truncate(j, i))
            for p, q in zip([a.base, *a.comps], [b.base, *b.comps]):
                res.update(p, q)
        if lifted:
            s = MorphismScenario(g, source, target, j.order)
            L = LiftedCoordinates(j.base, j.comps)
            top = pushforward_lifted(s, L)
            for i in range(1, j.order + 1):
                si = MorphismScenario(g, source.truncated(i), target.truncated(i), i)
                low = pushforward_lifted(si, L.truncate(i))
                for p, q in zip(top.truncate(i).fibre, low.fibre):
                    res.update(p, q)
    tol = 0 if g.backend == "exact" else tolerance
    return res.record("projective-consistency", jmax, len(jets), tol,
                      details={"lifted": lifted})


def check_fibre_linearity(s: MorphismScenario, samples: int, rng,
                          tolerance=DEFAULT_TOL) -> CheckRecord:
    """The lifted T^k g against ``(g(x), dg xi_1, ..., dg xi_k)``, with additivity and homogeneity."""
    g = s.g
    res = Residual()
    additivity = Residual()
    for _ in range(samples):
        x = sample_point(rng, g.domain, g.backend)
        f1 = sample_blocks(rng, g.n, s.k, g.backend)
        f2 = sample_blocks(rng, g.n, s.k, g.backend)
        a = draw(rng, -2.0, 2.0, g.backend)
        J = jacobian(g, x)
        p1 = pushforward_lifted(s, LiftedCoordinates(x, f1))
        p2 = pushforward_lifted(s, LiftedCoordinates(x, f2))
        combo = [tuple(a * u + v for u, v in zip(b1, b2)) for b1, b2 in zip(f1, f2)]
        p3 = pushforward_lifted(s, LiftedCoordinates(x, combo))
        res.update(p1.base, g(x))
        for blk, xi in zip(p1.fibre, f1):
            res.update(blk, J.dot(_vec(xi)))
        for b1, b2, b3 in zip(p1.fibre, p2.fibre, p3.fibre):
            additivity.update(b3, a * _vec(b1) + _vec(b2))
            res.update(b3, a * _vec(b1) + _vec(b2))
    return res.record("fibre-linearity", s.k, samples, s.tolerance(tolerance),
                      details={"additivity_abs": additivity.max_abs,
                               "additivity_rel": additivity.max_rel})
