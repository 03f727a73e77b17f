"""Connection-induced vector bundle charts on T^kM.

For a jet ``[gamma, x]_k`` the fibre coordinates are ``z^1 = gamma'(0)`` and

    z^i = 1/i { gamma^(i)(0)/(i-1)! + M^1(u_1) gamma^(i-1)(0)/(i-2)! + ...
                + M^{i-1}(u_{i-1}) gamma'(0) },

with ``u_j = (x, gamma'(0), ..., gamma^(j)(0)/j!)``.  In scaled components
``xi_j = gamma^(j)(0)/j!`` this reads
``z^i = xi_i + 1/i sum_{j<i} (i-j) M^j(u_j) xi_{i-j}``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import series as S
from .connections import ConnectionComponents, convex_combine
from .expr import MapSpec, jacobian
from .jets import NaturalJet
from .report import CheckRecord, Residual
from .sampling import draw, sample_blocks, sample_point

__all__ = [
    "LiftedCoordinates",
    "CurveMu",
    "trivialize",
    "build_mu",
    "detrivialize",
    "transition_map",
    "transition_check",
    "round_trip_check",
    "convex_fibre_check",
]


@dataclass(frozen=True)
class LiftedCoordinates:
    """``(x; z^1, ..., z^k)`` with ``z^1 = xi_1``."""

    base: tuple
    fibre: tuple

    def __post_init__(self):
        base = tuple(self.base)
        fibre = tuple(tuple(f) for f in self.fibre)
        if any(len(f) != len(base) for f in fibre):
            raise ValueError("fibre blocks must share the base dimension")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "fibre", fibre)

    @property
    def order(self):
        return len(self.fibre)

    def truncate(self, i):
        if not 1 <= i <= self.order:
            raise ValueError(f"cannot truncate order {self.order} coordinates to {i}")
        return LiftedCoordinates(self.base, self.fibre[:i])


@dataclass(frozen=True)
class CurveMu:
    """Polynomial curve ``mu(t) = sum_i coeffs[i] t^i`` realising lifted coordinates."""

    coeffs: tuple

    @property
    def base(self):
        return self.coeffs[0]

    def jet(self):
        return NaturalJet(self.coeffs[0], self.coeffs[1:])


def _vec(v):
    return np.asarray(v, dtype=object)


def _check_orders(C, k, n):
    if C.order < k:
        raise ValueError(f"components of order {C.order} cannot chart T^{k}")
    if C.n != n:
        raise ValueError("dimension mismatch between components and jet")


def trivialize(C: ConnectionComponents, j: NaturalJet) -> LiftedCoordinates:
    """Fibre coordinates of ``j`` in the vector bundle chart induced by ``C``."""
    k = j.order
    _check_orders(C, k, j.dim)
    if k == 1:
        return LiftedCoordinates(j.base, j.comps)
    mats = C.matrices(j.base, j.comps[: k - 1])
    xi = [_vec(c) for c in j.comps]
    fibre = [j.comps[0]]
    for i in range(2, k + 1):
        # gamma^(i)/(i-1)! = i xi_i and gamma^(i-j)/(i-j-1)! = (i-j) xi_{i-j}
        acc = i * xi[i - 1]
        for jj in range(1, i):
            acc = acc + mats[jj - 1].dot((i - jj) * xi[i - jj - 1])
        fibre.append(tuple(S.divide(v, i) for v in acc))
    return LiftedCoordinates(j.base, fibre)


def build_mu(C: ConnectionComponents, x, fibre) -> CurveMu:
    """The curve whose jet has the prescribed lifted coordinates.

    ``mu_1(t) = x + t xi_1`` and ``mu_i = mu_{i-1} + t^i/i {i xi_i -
    M^1 mu_{i-1}^(i-1)(0)/(i-2)! - ... - M^{i-1}(x, xi_1, ..) xi_1}``.
    """
    fibre = [tuple(f) for f in fibre]
    k = len(fibre)
    _check_orders(C, k, len(tuple(x)))
    coeffs = [tuple(x), fibre[0]]
    for i in range(2, k + 1):
        mats = C.matrices(coeffs[0], coeffs[1:i])
        acc = i * _vec(fibre[i - 1])
        for jj in range(1, i):
            acc = acc - mats[jj - 1].dot((i - jj) * _vec(coeffs[i - jj]))
        coeffs.append(tuple(S.divide(v, i) for v in acc))
    return CurveMu(tuple(coeffs))


def detrivialize(C: ConnectionComponents, L: LiftedCoordinates) -> NaturalJet:
    """Inverse of :func:`trivialize`, through the curve of :func:`build_mu`."""
    return build_mu(C, L.base, L.fibre).jet()


def transition_map(C_alpha, C_beta, phi: MapSpec, L: LiftedCoordinates) -> LiftedCoordinates:
    """``Phi_beta o Phi_alpha^{-1}`` computed through natural charts."""
    from .morphisms import pushforward_natural

    j = detrivialize(C_alpha, L)
    return trivialize(C_beta, pushforward_natural(phi, j))


def transition_check(C_alpha, C_beta, phi: MapSpec, k: int, samples: int, rng,
                     tolerance=1e-8, margin=0.05) -> CheckRecord:
    """Lifted transition versus ``(phi(x), dphi xi_1, ..., dphi xi_k)``, plus linearity."""
    res = Residual()
    lin = Residual()
    for _ in range(samples):
        x = sample_point(rng, phi.domain, phi.backend, margin)
        f1 = sample_blocks(rng, phi.n, k, phi.backend)
        f2 = sample_blocks(rng, phi.n, k, phi.backend)
        a = draw(rng, -2.0, 2.0, phi.backend)
        J = jacobian(phi, x)
        out1 = transition_map(C_alpha, C_beta, phi, LiftedCoordinates(x, f1))
        res.update(out1.base, phi(x))
        for blk, xi in zip(out1.fibre, f1):
            res.update(blk, J.dot(_vec(xi)))
        combo = tuple(tuple(a * p + q for p, q in zip(b1, b2)) for b1, b2 in zip(f1, f2))
        out2 = transition_map(C_alpha, C_beta, phi, LiftedCoordinates(x, f2))
        out3 = transition_map(C_alpha, C_beta, phi, LiftedCoordinates(x, combo))
        for b1, b2, b3 in zip(out1.fibre, out2.fibre, out3.fibre):
            lin.update(b3, a * _vec(b1) + _vec(b2))
            res.update(b3, a * _vec(b1) + _vec(b2))
    tol = 0 if phi.backend == "exact" else tolerance
    return res.record("transition-linearity", k, samples, tol,
                      details={"linearity_abs": lin.max_abs})


def round_trip_check(C, n, k, samples, rng, domain, backend, tolerance=1e-9) -> CheckRecord:
    """``trivialize o detrivialize`` and ``detrivialize o trivialize`` against identity."""
    res = Residual()
    for _ in range(samples):
        x = sample_point(rng, domain, backend)
        fib = sample_blocks(rng, n, k, backend)
        L = LiftedCoordinates(x, fib)
        back = trivialize(C, detrivialize(C, L))
        for p, q in zip(back.fibre, L.fibre):
            res.update(p, q)
        j = NaturalJet(x, sample_blocks(rng, n, k, backend))
        again = detrivialize(C, trivialize(C, j))
        for p, q in zip(again.comps, j.comps):
            res.update(p, q)
    tol = 0 if backend == "exact" else tolerance
    return res.record("round-trip", k, samples, tol)


def convex_fibre_check(C1, C2, lams, n, k, samples, rng, domain, backend,
                       tolerance=1e-9) -> CheckRecord:
    """Fibre coordinates under ``lam C1 + (1-lam) C2`` against the affine combination."""
    res = Residual()
    for _ in range(samples):
        x = sample_point(rng, domain, backend)
        j = NaturalJet(x, sample_blocks(rng, n, k, backend))
        z1 = trivialize(C1, j)
        z2 = trivialize(C2, j)
        for lam in lams:
            zc = trivialize(convex_combine(C1, C2, lam), j)
            for a, b, c in zip(zc.fibre, z1.fibre, z2.fibre):
                res.update(a, lam * _vec(b) + (1 - lam) * _vec(c))
    tol = 0 if backend == "exact" else tolerance
    return res.record("convex-fibre", k, samples, tol)
