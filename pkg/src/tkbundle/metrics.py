"""Riemannian metrics, Levi-Civita connections and isometric immersions."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import series as S
from .connections import Christoffel, _solve, lift_connection
from .expr import MapSpec, jacobian, second_derivative
from .morphisms import MorphismScenario, pushforward_lifted
from .report import CheckRecord, Residual
from .sampling import sample_blocks, sample_point, sample_vector
from .trivialization import LiftedCoordinates

__all__ = [
    "MetricField",
    "ImmersionSpec",
    "RankDeficiencyError",
    "pullback_metric",
    "levi_civita",
    "koszul_check",
    "gauss_residual",
    "lifted_metric_residual",
]


class RankDeficiencyError(ValueError):
    """The differential of an immersion dropped rank at a point."""


def _float_matrix(A):
    return np.array([[float(S.constant_part(v)) for v in row] for row in A])


class MetricField:
    """A field ``x -> g(x)`` of symmetric bilinear forms.

    Parameters
    ----------
    n : int
        Chart dimension.
    matrix_fn : callable
        Returns the ``(n, n)`` Gram matrix at ``x``; must accept series
        entries so that derivatives can be taken by dual variables.
    """

    def __init__(self, n: int, matrix_fn: Callable, name="metric", domain=None):
        self.n = n
        self._fn = matrix_fn
        self.name = name
        self.domain = domain

    def matrix(self, x):
        return np.asarray(self._fn(tuple(x)), dtype=object).reshape(self.n, self.n)

    def __call__(self, x, u, v):
        return np.asarray(u, dtype=object).dot(self.matrix(x).dot(np.asarray(v, dtype=object)))

    def derivative(self, x):
        """``dG[i, j, l] = d g_ij / d x_l``."""
        n = self.n
        names = [S.fresh_name("m") for _ in range(n)]
        point = [x[l] + S.variable(names[l], 1) for l in range(n)]
        G = self.matrix(point)
        out = np.empty((n, n, n), dtype=object)
        for i in range(n):
            for j in range(n):
                for l in range(n):
                    c = G[i, j]
                    for name in names:
                        c = S.coefficient(c, name, 1 if name == names[l] else 0)
                    out[i, j, l] = c
        return out

    def min_eigenvalue(self, x):
        return float(np.linalg.eigvalsh(_float_matrix(self.matrix(x))).min())

    @classmethod
    def from_exprs(cls, exprs, n, domain=None, backend="float", name="metric"):
        """Metric from an ``n x n`` array of expression strings, which must be symmetric."""
        rows = [list(r) for r in exprs]
        if len(rows) != n or any(len(r) != n for r in rows):
            raise ValueError(f"metric needs an {n}x{n} array of expressions")
        for i in range(n):
            for j in range(i):
                if rows[i][j].replace(" ", "") != rows[j][i].replace(" ", ""):
                    raise ValueError(f"metric entries [{i}][{j}] and [{j}][{i}] differ")
        spec = MapSpec.parse([e for r in rows for e in r], n, domain, backend)
        return cls(n, lambda x: np.asarray(spec(x), dtype=object).reshape(n, n),
                   name=name, domain=spec.domain)

    @classmethod
    def euclidean(cls, n):
        eye = np.eye(n, dtype=int).astype(object)
        return cls(n, lambda x: eye, name="euclidean")


@dataclass(frozen=True)
class ImmersionSpec:
    f: MapSpec
    h: MetricField

    def __post_init__(self):
        if self.f.n > self.f.m:
            raise ValueError("an immersion needs source dimension <= target dimension")
        if self.h.n != self.f.m:
            raise ValueError("ambient metric dimension differs from the map's target")


def pullback_metric(s: ImmersionSpec) -> MetricField:
    """``g(x)(u, v) = h(f(x))(df u, df v)``."""
    f = s.f

    def matrix(x):
        J = jacobian(f, x)
        if not any(isinstance(v, S.Series) for v in x):
            sv = np.linalg.svd(_float_matrix(J), compute_uv=False)
            if sv.min() <= 1e-12 * max(1.0, sv.max()):
                raise RankDeficiencyError(f"df has rank below {f.n} at x = {tuple(x)}")
        return J.T.dot(s.h.matrix(f(x))).dot(J)

    return MetricField(f.n, matrix, name="pullback", domain=f.domain)


def levi_civita(g: MetricField) -> Christoffel:
    """Christoffel symbols from the Koszul formula.

    ``g(Gamma(u, v), w) = 1/2 (dg.u(v, w) + dg.v(u, w) - dg.w(u, v))`` is solved
    against the Gram matrix for every pair of basis vectors.
    """
    n = g.n

    def symbols(x):
        G = g.matrix(x)
        dG = g.derivative(x)
        rhs = np.empty((n, n, n), dtype=object)
        for w in range(n):
            for u in range(n):
                for v in range(u, n):
                    val = S.divide(dG[v, w, u] + dG[u, w, v] - dG[u, v, w], 2)
                    # mirrored so torsion vanishes exactly, even in floats
                    rhs[w, u, v] = rhs[w, v, u] = val
        try:
            sol = _solve(G, rhs.reshape(n, n * n))
        except ZeroDivisionError:
            raise ValueError(f"singular Gram matrix at x = {tuple(x)}") from None
        return np.asarray(sol, dtype=object).reshape(n, n, n)

    return Christoffel(n, symbols, symmetric=True, name=f"levi-civita({g.name})",
                       domain=g.domain)


def koszul_check(g: MetricField, samples: int, rng, domain, backend="float",
                 tolerance=1e-7) -> CheckRecord:
    """Torsion and metric-compatibility residuals of :func:`levi_civita` at random points."""
    gamma = levi_civita(g)
    torsion = Residual()
    compat = Residual()
    for _ in range(samples):
        x = sample_point(rng, domain, backend)
        u, v, w = (sample_vector(rng, g.n, backend) for _ in range(3))
        sym = gamma.symbols(x)
        torsion.update(sym.ravel(), np.transpose(sym, (0, 2, 1)).ravel())
        dgw = np.einsum("ijl,l->ij", g.derivative(x), np.asarray(w, dtype=object))
        lhs = np.asarray(u, dtype=object).dot(dgw).dot(np.asarray(v, dtype=object))
        rhs = g(x, gamma(x, w, u), v) + g(x, u, gamma(x, w, v))
        compat.update((lhs,), (rhs,))
    res = Residual()
    res.max_abs = max(torsion.max_abs, compat.max_abs)
    res.max_rel = max(torsion.max_rel, compat.max_rel)
    res.exact_zero = torsion.exact_zero and compat.exact_zero
    tol = 0 if backend == "exact" else tolerance
    return res.record("koszul", 1, samples, tol,
                      details={"torsion_abs": torsion.max_abs, "compatibility_abs": compat.max_abs})


def _unit(v):
    nrm = float(np.sqrt(sum(float(c) ** 2 for c in v)))
    return tuple(c / nrm for c in v)


def gauss_residual(s: ImmersionSpec, samples: int, rng, tolerance=1e-8,
                   unit_vectors=True) -> CheckRecord:
    """Projected and full residuals of ``df Gamma_M(u, v) - Gamma_N(df u, df v) - d^2 f(u, v)``.

    The projected residual pairs the vector with every ``df e_w`` under ``h``
    and decides pass or fail.  The full vector residual is the normal
    (second fundamental form) part and is reported in ``details``, along
    with whether it also stays below tolerance.
    """
    f = s.f
    gamma_m = levi_civita(pullback_metric(s))
    gamma_n = levi_civita(s.h)
    projected = Residual()
    full = Residual()
    full_min = np.inf
    for _ in range(samples):
        x = sample_point(rng, f.domain, f.backend)
        u, v = sample_vector(rng, f.n), sample_vector(rng, f.n)
        if unit_vectors:
            u, v = _unit(u), _unit(v)
        u, v = np.asarray(u, dtype=object), np.asarray(v, dtype=object)
        J = jacobian(f, x)
        H = second_derivative(f, x)
        fx = f(x)
        tangent = J.dot(np.asarray(gamma_m(x, u, v), dtype=object))
        ambient = np.asarray(gamma_n(fx, J.dot(u), J.dot(v)), dtype=object) + \
            np.einsum("ajk,j,k->a", H, u, v)
        hm = s.h.matrix(fx)
        lhs = tuple((tangent).dot(hm).dot(J[:, w]) for w in range(f.n))
        rhs = tuple((ambient).dot(hm).dot(J[:, w]) for w in range(f.n))
        projected.update(lhs, rhs)
        full_min = min(full_min, full.update(tuple(tangent), tuple(ambient)))
    rec = projected.record("gauss-residual", 1, samples, tolerance,
                           details={"full_abs": full.max_abs, "full_rel": full.max_rel,
                                    "full_min": float(full_min),
                                    "full_related": full.max_rel <= tolerance})
    return rec


def _isometry_gate(g: MetricField, iso: MapSpec, samples, rng, tolerance):
    res = Residual()
    for _ in range(samples):
        x = sample_point(rng, iso.domain, iso.backend)
        u, v = sample_vector(rng, g.n, iso.backend), sample_vector(rng, g.n, iso.backend)
        J = jacobian(iso, x)
        res.update((g(x, u, v),), (g(iso(x), J.dot(np.asarray(u, dtype=object)),
                                     J.dot(np.asarray(v, dtype=object))),))
    return res


def lifted_metric_residual(g: MetricField, iso: MapSpec, k: int, samples: int, rng,
                           tolerance=1e-7) -> CheckRecord:
    """Does the lifted ``iso`` preserve the direct-sum metric ``sum_i g(x)(z_i, z'_i)``?

    Lifted coordinates come from the Levi-Civita connection of ``g`` on
    both sides.  An order-1 isometry gate runs first.
    """
    tol = 0 if iso.backend == "exact" else tolerance
    gate = _isometry_gate(g, iso, samples, rng, tolerance)
    if not gate.passes(tol):
        rec = gate.record("lifted-isometry", k, samples, tol,
                          diagnostic=f"not an isometry at order 1 (relative residual "
                                     f"{gate.max_rel:.3e}); lifted metric not tested")
        return CheckRecord(**{**rec.__dict__, "passed": False})
    C = lift_connection(levi_civita(g), k)
    s = MorphismScenario(iso, C, C, k)
    res = Residual()
    for _ in range(samples):
        x = sample_point(rng, iso.domain, iso.backend)
        f1 = sample_blocks(rng, g.n, k, iso.backend)
        f2 = sample_blocks(rng, g.n, k, iso.backend)
        p1 = pushforward_lifted(s, LiftedCoordinates(x, f1))
        p2 = pushforward_lifted(s, LiftedCoordinates(x, f2))
        before = sum(g(x, a, b) for a, b in zip(f1, f2))
        after = sum(g(p1.base, a, b) for a, b in zip(p1.fibre, p2.fibre))
        res.update((after,), (before,))
    return res.record("lifted-isometry", k, samples, tol,
                      details={"gate_rel": gate.max_rel})
