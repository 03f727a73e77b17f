"""Brute-force oracles that share no arithmetic with the main code paths.

Polynomial maps are expanded literally with :class:`PolySeries`, a dense
rational polynomial of bounded total degree with its own expression walker.
Derivative tensors of non-polynomial maps are estimated by central
differences.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np

from .expr import Add, Const, Div, Func, MapSpec, Mul, Neg, Pow, Sub, Var
from .report import CheckRecord, Residual

__all__ = [
    "PolySeries",
    "NotPolynomialError",
    "poly_eval",
    "poly_compose_oracle",
    "finite_difference_tensor",
    "finite_difference_christoffel",
    "lemma_A1_check",
    "lemma_A2_check",
]


class NotPolynomialError(ValueError):
    pass


class PolySeries:
    """Dense polynomial in ``nvars`` variables, truncated above total degree ``degree``.

    Coefficients live in an object array of shape ``(degree + 1,) * nvars``
    holding ``Fraction`` values.
    """

    def __init__(self, nvars, degree, coeffs=None):
        self.nvars = nvars
        self.degree = degree
        shape = (degree + 1,) * nvars
        if coeffs is None:
            coeffs = np.full(shape, Fraction(0), dtype=object)
        self.coeffs = coeffs
        self._truncate()

    def _truncate(self):
        for idx in zip(*np.nonzero(self.coeffs != 0)):
            if sum(idx) > self.degree:
                self.coeffs[idx] = Fraction(0)

    @classmethod
    def const(cls, nvars, degree, value):
        p = cls(nvars, degree)
        p.coeffs[(0,) * nvars] = Fraction(value)
        return p

    @classmethod
    def var(cls, nvars, degree, index):
        p = cls(nvars, degree)
        if degree >= 1:
            idx = [0] * nvars
            idx[index] = 1
            p.coeffs[tuple(idx)] = Fraction(1)
        return p

    def _lift(self, other):
        if isinstance(other, PolySeries):
            return other
        return PolySeries.const(self.nvars, self.degree, other)

    def __add__(self, other):
        other = self._lift(other)
        return PolySeries(self.nvars, self.degree, self.coeffs + other.coeffs)

    __radd__ = __add__

    def __neg__(self):
        return PolySeries(self.nvars, self.degree, -self.coeffs)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        other = self._lift(other)
        out = PolySeries(self.nvars, self.degree)
        a_idx = [tuple(i) for i in np.argwhere(self.coeffs != 0)]
        b_idx = [tuple(i) for i in np.argwhere(other.coeffs != 0)]
        for ia in a_idx:
            da = sum(ia)
            for ib in b_idx:
                if da + sum(ib) > self.degree:
                    continue
                idx = tuple(p + q for p, q in zip(ia, ib))
                out.coeffs[idx] += self.coeffs[ia] * other.coeffs[ib]
        return out

    __rmul__ = __mul__

    def __pow__(self, n):
        out = PolySeries.const(self.nvars, self.degree, 1)
        for _ in range(n):
            out = out * self
        return out

    def is_constant(self):
        zero = (0,) * self.nvars
        return all(idx == zero for idx in map(tuple, np.argwhere(self.coeffs != 0)))

    def coefficient(self, powers):
        """Coefficient of the monomial with exponents ``powers``."""
        if sum(powers) > self.degree:
            raise ValueError("monomial above the degree bound")
        return self.coeffs[tuple(powers)]


def poly_eval(node, args, nvars, degree):
    """Literal expansion of an expression tree on polynomial arguments."""
    if isinstance(node, Var):
        return args[node.index - 1]
    if isinstance(node, Const):
        return PolySeries.const(nvars, degree, node.value)
    if isinstance(node, Neg):
        return -poly_eval(node.arg, args, nvars, degree)
    if isinstance(node, Add):
        return poly_eval(node.left, args, nvars, degree) + poly_eval(node.right, args, nvars, degree)
    if isinstance(node, Sub):
        return poly_eval(node.left, args, nvars, degree) - poly_eval(node.right, args, nvars, degree)
    if isinstance(node, Mul):
        return poly_eval(node.left, args, nvars, degree) * poly_eval(node.right, args, nvars, degree)
    if isinstance(node, Div):
        den = poly_eval(node.right, args, nvars, degree)
        if not den.is_constant():
            raise NotPolynomialError("division by a non-constant expression")
        c = den.coeffs[(0,) * nvars]
        if c == 0:
            raise ZeroDivisionError("division by zero")
        return poly_eval(node.left, args, nvars, degree) * (Fraction(1) / c)
    if isinstance(node, Pow):
        return poly_eval(node.base, args, nvars, degree) ** node.exponent
    if isinstance(node, Func):
        raise NotPolynomialError(f"{node.name} is not polynomial")
    raise TypeError(f"unknown node {node!r}")


def _compose(g: MapSpec, curve_fn, nvars, degree):
    comps = curve_fn()
    return [poly_eval(e, comps, nvars, degree) for e in g.exprs]


def poly_compose_oracle(g: MapSpec, curve, k: int):
    """Raw derivatives ``0..k`` of ``g(c_0 + c_1 t + ...)`` by literal expansion."""
    curve = [tuple(c) for c in curve]

    def comps():
        t = PolySeries.var(1, k, 0)
        out = []
        for a in range(g.n):
            acc = PolySeries(1, k)
            for i, c in enumerate(curve[: k + 1]):
                acc = acc + (t**i) * Fraction(c[a])
            out.append(acc)
        return out

    values = _compose(g, comps, 1, k)
    return [tuple(math.factorial(i) * v.coefficient((i,)) for v in values) for i in range(k + 1)]


def finite_difference_tensor(m: MapSpec, x, order: int, h=1e-5):
    """Central-difference estimate of ``d m(x)`` (order 1) or ``d^2 m(x)`` (order 2)."""
    if order not in (1, 2):
        raise ValueError("finite differences are provided for orders 1 and 2 only")
    x = np.asarray([float(v) for v in x])
    for v, (lo, hi) in zip(x, m.domain):
        if v - order * h < float(lo) or v + order * h > float(hi):
            raise ValueError(f"point {tuple(x)} closer than {order}*h to the domain boundary")
    n = m.n
    f = lambda p: np.array([float(v) for v in m(tuple(p))])
    eye = np.eye(n) * h
    if order == 1:
        cols = [(f(x + eye[j]) - f(x - eye[j])) / (2 * h) for j in range(n)]
        return np.stack(cols, axis=1)
    out = np.empty((m.m, n, n))
    for j in range(n):
        for l in range(n):
            out[:, j, l] = (f(x + eye[j] + eye[l]) - f(x + eye[j] - eye[l])
                            - f(x - eye[j] + eye[l]) + f(x - eye[j] - eye[l])) / (4 * h * h)
    return out


def finite_difference_christoffel(matrix_fn, x, h=1e-5):
    """Koszul symbols from a metric given as a float matrix function, with differenced derivatives."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    G = np.asarray(matrix_fn(x), dtype=float)
    dG = np.empty((n, n, n))
    for l in range(n):
        e = np.zeros(n)
        e[l] = h
        dG[:, :, l] = (np.asarray(matrix_fn(x + e), dtype=float)
                       - np.asarray(matrix_fn(x - e), dtype=float)) / (2 * h)
    low = np.empty((n, n, n))
    for w, u, v in itertools.product(range(n), repeat=3):
        low[w, u, v] = 0.5 * (dG[v, w, u] + dG[u, w, v] - dG[u, v, w])
    return np.linalg.solve(G, low.reshape(n, n * n)).reshape(n, n, n)


def _frac_vec(v):
    return tuple(Fraction(c) for c in v)


def lemma_A1_check(f: MapSpec, components, x, fibre, k: int) -> CheckRecord:
    """Mixed ``s, t^{k-1}`` derivative of ``f`` along the two-parameter curve built from ``mu``.

    ``d(t, s) = sum_{i=0}^{k-1} t^i/i! (mu^(i)(0) + s mu^(i+1)(0))`` is compared
    against ``(f o mu)^(k)(0)``, where ``mu`` realises the lifted
    coordinates ``fibre`` at ``x`` under ``components``.
    """
    from .trivialization import build_mu

    if k < 2:
        raise ValueError("the lemma needs k >= 2")
    mu = build_mu(components, x, list(fibre)[:k])
    c = [_frac_vec(v) for v in mu.coeffs]
    while len(c) < k + 1:
        c.append(tuple(Fraction(0) for _ in c[0]))

    def d_comps():
        t = PolySeries.var(2, k, 0)
        s = PolySeries.var(2, k, 1)
        out = []
        for a in range(f.n):
            acc = PolySeries(2, k)
            for i in range(k):
                # t^i/i! (i! c_i + s (i+1)! c_{i+1}) = t^i (c_i + s (i+1) c_{i+1})
                acc = acc + (t**i) * (s * ((i + 1) * c[i + 1][a]) + c[i][a])
            out.append(acc)
        return out

    def mu_comps():
        t = PolySeries.var(1, k, 0)
        return [sum(((t**i) * c[i][a] for i in range(k + 1)), PolySeries(1, k))
                for a in range(f.n)]

    lhs = [math.factorial(k - 1) * v.coefficient((k - 1, 1)) for v in _compose(f, d_comps, 2, k)]
    rhs = [math.factorial(k) * v.coefficient((k,)) for v in _compose(f, mu_comps, 1, k)]
    res = Residual()
    res.update(lhs, rhs)
    return res.record("lemma-A1", k, 1, 0)


def lemma_A2_check(f: MapSpec, x, y, xis, j, k: int) -> CheckRecord:
    """Both parts of the bookkeeping lemma for the curves ``c_1, ..., c_k`` and ``c``.

    With ``c(t, s) = x + s y + sum_m t^m xi_m``, the curve ``c_1`` adds
    ``h xi_1`` and ``c_i`` (``i >= 2``) replaces the ``t^{i-1}`` term by
    ``t^{i-1} (xi_{i-1} + h i xi_i)``.  Part (i) compares
    ``(j-1)! [h s t^{j-1}] sum_i f(c_i)`` with ``j! [s t^j] f(c)`` and part
    (ii) compares ``(j-1)! [h t^{j-1}]`` with ``j! [t^j]``.  ``j`` may be a
    single index or a sequence of them; the expansions are shared.
    """
    js = [j] if isinstance(j, int) else list(j)
    if any(not 1 <= jj <= k for jj in js):
        raise ValueError(f"j = {j} outside 1..{k}")
    x, y = _frac_vec(x), _frac_vec(y)
    xis = [_frac_vec(v) for v in xis][:k]
    deg = k + 1
    T, Sv, H = (PolySeries.var(3, deg, i) for i in range(3))

    def curve(i):
        def comps():
            out = []
            for a in range(f.n):
                acc = Sv * y[a] + x[a]
                if i == 1:
                    acc = acc + H * xis[0][a]
                for m in range(1, k + 1):
                    coef = PolySeries.const(3, deg, xis[m - 1][a])
                    if i >= 2 and m == i - 1:
                        coef = coef + H * (i * xis[i - 1][a])
                    acc = acc + (T**m) * coef
                out.append(acc)
            return out
        return comps

    total = None
    for i in range(1, k + 1):
        vals = _compose(f, curve(i), 3, deg)
        total = vals if total is None else [p + q for p, q in zip(total, vals)]
    plain = _compose(f, curve(0), 3, deg)
    part1, part2 = Residual(), Residual()
    for jj in js:
        fj1, fj = math.factorial(jj - 1), math.factorial(jj)
        part1.update([fj1 * v.coefficient((jj - 1, 1, 1)) for v in total],
                     [fj * v.coefficient((jj, 1, 0)) for v in plain])
        part2.update([fj1 * v.coefficient((jj - 1, 0, 1)) for v in total],
                     [fj * v.coefficient((jj, 0, 0)) for v in plain])
    res = Residual()
    res.max_abs = max(part1.max_abs, part2.max_abs)
    res.max_rel = max(part1.max_rel, part2.max_rel)
    res.exact_zero = part1.exact_zero and part2.exact_zero
    return res.record("lemma-A2", k, 1, 0,
                      details={"j": js, "part_i_abs": part1.max_abs, "part_ii_abs": part2.max_abs})
