"""Linear connections on charts and the connection maps they induce on T^kM.

A connection map is stored through its local components ``M^i``: for a
jet ``u = (x, xi_1, ..., xi_i)`` each ``M^i(u)`` is a linear map of the
model space.  Jet arguments always use the scaled convention
``xi_j = gamma^(j)(0) / j!``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from . import series as S
from .expr import MapSpec, inverse_point, jacobian, parse_expr, second_derivative
from .jets import NaturalJet, TangentOfTk

__all__ = [
    "Christoffel",
    "ConnectionComponents",
    "LiftedComponents",
    "CombinedComponents",
    "FieldComponents",
    "ConnectionMapValue",
    "lift_connection",
    "apply_connection_map",
    "vertical_shift",
    "convex_combine",
    "transport_christoffel",
    "pullback_christoffel",
]


def _zeros(shape):
    return np.zeros(shape, dtype=object)


def _entrywise(a, fn):
    out = np.empty(a.shape, dtype=object)
    for idx, v in np.ndenumerate(a):
        out[idx] = fn(v)
    return out


class Christoffel:
    """A field ``x -> Gamma(x)`` of bilinear maps on the model space.

    ``symbols(x)[i, j, k]`` is component ``i`` of ``Gamma(x)(e_j, e_k)``.
    """

    def __init__(self, n, symbols_fn: Callable, symmetric=False, name="", domain=None):
        self.n = n
        self._symbols = symbols_fn
        self.symmetric = symmetric
        self.name = name
        self.domain = domain
        self.identically_zero = False

    def symbols(self, x):
        return self._symbols(tuple(x))

    def __call__(self, x, u, v):
        G = self.symbols(x)
        u = np.asarray(u, dtype=object)
        v = np.asarray(v, dtype=object)
        return tuple(np.tensordot(np.tensordot(G, v, axes=([2], [0])), u, axes=([1], [0])).tolist())

    def contract_first(self, x, u):
        """The matrix of ``y -> Gamma(x)(u, y)``."""
        G = self.symbols(x)
        return np.tensordot(G, np.asarray(u, dtype=object), axes=([1], [0]))

    @property
    def is_flat(self):
        return self.identically_zero

    @classmethod
    def flat(cls, n):
        zero = _zeros((n, n, n))
        out = cls(n, lambda x: zero, symmetric=True, name="flat")
        out.identically_zero = True
        return out

    @classmethod
    def from_exprs(cls, exprs, n, domain=None, backend="float", symmetric=None, name="christoffel"):
        """Build from an ``n x n x n`` nested list of DSL strings."""
        flat = []
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    flat.append(exprs[i][j][k])
        spec = MapSpec.parse([str(e) for e in flat], n, domain, backend)

        def symbols(x):
            return np.array(spec(x), dtype=object).reshape(n, n, n)

        if symmetric is None:
            symmetric = all(
                parse_expr(str(exprs[i][j][k]), n, backend) == parse_expr(str(exprs[i][k][j]), n, backend)
                for i in range(n) for j in range(n) for k in range(n)
            )
        return cls(n, symbols, symmetric=symmetric, name=name, domain=spec.domain)


class ConnectionComponents:
    """Local components ``M^1, ..., M^k`` of a connection map on T^kM."""

    def __init__(self, order, n):
        self.order = order
        self.n = n

    def matrices(self, x, xis):
        """``[M^1(u_1), ..., M^i(u_i)]`` for ``u = (x, xi_1, ..., xi_i)``, ``i = len(xis)``."""
        raise NotImplementedError

    def matrix(self, i, x, xis):
        return self.matrices(x, list(xis)[:i])[i - 1]

    def apply(self, i, x, xis, y):
        """``M^i(x, xi_1..xi_i) y``."""
        return tuple(self.matrix(i, x, xis).dot(np.asarray(y, dtype=object)).tolist())

    def truncated(self, order):
        if order > self.order:
            raise ValueError(f"components of order {self.order} cannot serve order {order}")
        clone = object.__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone.order = order
        return clone

    def _check(self, xis):
        if len(xis) > self.order:
            raise ValueError(f"components of order {self.order} asked for order {len(xis)}")


class LiftedComponents(ConnectionComponents):
    """Components induced by a linear connection through the lifting recursion

    ``M^1(x, xi_1) y = Gamma(x)(xi_1, y)`` and
    ``M^k y = 1/k (sum_i d_i M^{k-1}(y, i xi_i) + M^1 [M^{k-1} y])``.

    The slot derivatives ``d_i M^{k-1}`` (slot 1 is ``x``, slot ``j+1`` is
    ``xi_j``) taken in directions ``i xi_i`` add up to one directional
    derivative, which is read off a dual variable threaded through the
    recursion itself.
    """

    def __init__(self, christoffel: Christoffel, order: int):
        super().__init__(order, christoffel.n)
        self.christoffel = christoffel

    def matrices(self, x, xis):
        xis = [tuple(v) for v in xis]
        self._check(xis)
        if not xis:
            return []
        return self._tower(tuple(x), xis)

    def _tower(self, x, xis):
        i = len(xis)
        if i == 1:
            return [self.christoffel.contract_first(x, xis[0])]
        name = S.fresh_name("h")
        h = S.variable(name, 1)
        xf = tuple(a + h * b for a, b in zip(x, xis[0]))
        xisf = [
            tuple(a + (j + 2) * h * b for a, b in zip(xis[j], xis[j + 1]))
            for j in range(i - 1)
        ]
        lower = self._tower(xf, xisf)
        values = [_entrywise(L, lambda v: S.coefficient(v, name, 0)) for L in lower]
        slope = _entrywise(lower[-1], lambda v: S.coefficient(v, name, 1))
        top = _entrywise(slope + values[0].dot(values[-1]), lambda v: S.divide(v, i))
        return values + [top]


class FieldComponents(ConnectionComponents):
    """Components given directly as callables ``fields[i-1](x, xis) -> matrix``."""

    def __init__(self, fields, n):
        super().__init__(len(fields), n)
        self.fields = list(fields)

    def matrices(self, x, xis):
        xis = [tuple(v) for v in xis]
        self._check(xis)
        return [np.asarray(self.fields[i](tuple(x), xis[: i + 1]), dtype=object)
                for i in range(len(xis))]


class CombinedComponents(ConnectionComponents):
    """Pointwise ``lam * C1 + (1 - lam) * C2``."""

    def __init__(self, first, second, lam):
        super().__init__(first.order, first.n)
        self.first = first
        self.second = second
        self.lam = lam

    def matrices(self, x, xis):
        a = self.first.matrices(x, xis)
        b = self.second.matrices(x, xis)
        lam = self.lam
        return [lam * p + (1 - lam) * q for p, q in zip(a, b)]


def lift_connection(christoffel: Christoffel, k: int) -> LiftedComponents:
    """Connection-map components on T^kM induced by ``christoffel``."""
    if k < 1:
        raise ValueError("order k must be at least 1")
    return LiftedComponents(christoffel, k)


@dataclass(frozen=True)
class ConnectionMapValue:
    """The ``k`` blocks ``(x, w_i)`` of a connection map value."""

    base: tuple
    blocks: tuple


def apply_connection_map(C: ConnectionComponents, t: TangentOfTk) -> ConnectionMapValue:
    """Local connection map: block ``i`` is ``eta_i + M^1 eta_{i-1} + ... + M^{i-1} eta_1 + M^i y``."""
    k = t.order
    if C.order < k:
        raise ValueError(f"components of order {C.order} cannot act on T^{k}")
    if C.n != t.u.dim:
        raise ValueError("dimension mismatch between components and tangent vector")
    mats = C.matrices(t.u.base, t.u.comps)
    y = np.asarray(t.y, dtype=object)
    etas = [np.asarray(e, dtype=object) for e in t.etas]
    blocks = []
    for i in range(1, k + 1):
        acc = etas[i - 1] + mats[i - 1].dot(y)
        for j in range(1, i):
            acc = acc + mats[j - 1].dot(etas[i - j - 1])
        blocks.append(tuple(acc.tolist()))
    return ConnectionMapValue(t.u.base, tuple(blocks))


def vertical_shift(t: TangentOfTk, a: int = 1) -> TangentOfTk:
    """Apply ``(u; y, eta_1, ..., eta_k) -> (u; 0, y, eta_1, ..., eta_{k-1})`` ``a`` times."""
    k = t.order
    if not 1 <= a <= k:
        raise ValueError(f"shift count {a} outside 1..{k}")
    zero = tuple(0 for _ in t.y)
    slots = [t.y, *t.etas]
    shifted = [zero] * a + slots[: k + 1 - a]
    return TangentOfTk(t.u, shifted[0], shifted[1:])


def convex_combine(C1, C2, lam, allow_affine=False) -> CombinedComponents:
    """``lam * C1 + (1 - lam) * C2``; ``lam`` must lie in [0, 1] unless ``allow_affine``."""
    if C1.order != C2.order or C1.n != C2.n:
        raise ValueError("components must share order and dimension")
    if not allow_affine and not 0 <= lam <= 1:
        raise ValueError(f"convex weight {lam} outside [0, 1]")
    return CombinedComponents(C1, C2, lam)


# -- change of chart ---------------------------------------------------------

def _solve(A, B):
    """Gaussian elimination for ``A X = B`` over any field-like scalars (incl. series)."""
    A = np.array(A, dtype=object)
    B = np.array(B, dtype=object)
    vec = B.ndim == 1
    if vec:
        B = B.reshape(-1, 1)
    n = A.shape[0]
    M = np.concatenate([A, B], axis=1)
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(float(S.constant_part(M[r, col]))))
        if S.constant_part(M[piv, col]) == 0:
            raise ZeroDivisionError("singular matrix")
        if piv != col:
            M[[col, piv]] = M[[piv, col]]
        inv = 1 / M[col, col] if isinstance(M[col, col], S.Series) else (
            Fraction(1) / M[col, col] if isinstance(M[col, col], (int, Fraction)) else 1.0 / M[col, col])
        M[col] = M[col] * inv
        for r in range(n):
            if r != col:
                f = M[r, col]
                if not (not isinstance(f, S.Series) and f == 0):
                    M[r] = M[r] - f * M[col]
    X = M[:, n:]
    return X.reshape(-1) if vec else X


def pullback_christoffel(target: Christoffel, g: MapSpec, name="pullback") -> Christoffel:
    """The unique connection on the source making ``target`` g-related to it.

    ``Gamma_src(u, v) = dg^{-1} [Gamma_tgt(g(x))(dg u, dg v) + d^2 g(u, v)]``;
    requires a square map with invertible differential.
    """
    if g.m != g.n:
        raise ValueError("pullback_christoffel needs a square map")
    n = g.n

    def symbols(x):
        J = jacobian(g, x)
        H = second_derivative(g, x)
        G = target.symbols(g(x))
        # rhs[a, j, k] = Gamma_tgt[a](J e_j, J e_k) + H[a, j, k]
        rhs = np.einsum("abc,bj,ck->ajk", G, J, J, optimize=False) + H
        sol = _solve(J, rhs.reshape(n, n * n))
        return np.asarray(sol, dtype=object).reshape(n, n, n)

    return Christoffel(n, symbols, symmetric=target.symmetric, name=name, domain=g.domain)


def transport_christoffel(source: Christoffel, phi: MapSpec, inverse: MapSpec = None,
                          name="transported") -> Christoffel:
    """Express ``source`` (chart alpha) in chart beta, where ``phi`` maps alpha to beta.

    ``Gamma_beta(phi x)(J u, J v) = J Gamma_alpha(x)(u, v) - d^2 phi(x)(u, v)``.
    The preimage ``x`` comes from ``inverse`` when given, else from Newton
    inversion of ``phi``.
    """
    if phi.m != phi.n:
        raise ValueError("transport_christoffel needs a square transition map")
    n = phi.n

    def symbols(xt):
        x = inverse(xt) if inverse is not None else inverse_point(phi, xt)
        J = jacobian(phi, x)
        H = second_derivative(phi, x)
        G = source.symbols(x)
        lowered = np.einsum("ai,ijk->ajk", J, G, optimize=False) - H
        # Gamma_beta[a, b, c] = lowered[a, j, k] Jinv[j, b] Jinv[k, c]
        Jinv = _solve(J, np.eye(n, dtype=int).astype(object))
        out = np.einsum("ajk,jb,kc->abc", lowered, Jinv, Jinv, optimize=False)
        return np.asarray(out, dtype=object)

    return Christoffel(n, symbols, symmetric=source.symmetric, name=name)
