"""Truncated multivariate power series over exact or floating-point scalars.

A :class:`Series` is a polynomial in a handful of named formal variables,
truncated per variable (``limits``) and optionally by total degree (``cap``).
Coefficients are plain Python scalars: ``int``, ``fractions.Fraction`` or
``float``.  Every geometric routine in the package is written against the
ordinary arithmetic operators, so the same code runs on numbers, on Taylor
jets of curves, and on nested dual numbers.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np

__all__ = [
    "Series",
    "MathDomainError",
    "fresh_name",
    "variable",
    "constant_part",
    "coefficient",
    "sin",
    "cos",
    "exp",
    "log",
    "sqrt",
    "divide",
]

_counter = itertools.count()


class MathDomainError(ArithmeticError):
    """Raised for log of a non-positive value, division by zero, and similar."""


def fresh_name(prefix="e"):
    """Return a variable name never handed out before in this process."""
    return f"{prefix}{next(_counter):06d}"


def _exceeds(exps, limits, cap):
    for e, lim in zip(exps, limits):
        if e > lim:
            return True
    return cap is not None and sum(exps) > cap


class Series:
    __slots__ = ("names", "limits", "cap", "terms")

    def __init__(self, names, limits, terms, cap=None):
        self.names = tuple(names)
        self.limits = tuple(limits)
        self.cap = cap
        self.terms = terms

    # -- construction -------------------------------------------------
    @classmethod
    def constant(cls, value, names=(), limits=(), cap=None):
        zero = (0,) * len(names)
        return cls(names, limits, {zero: value} if value != 0 else {}, cap)

    def _like(self, terms):
        return Series(self.names, self.limits, terms, self.cap)

    @property
    def degree_bound(self):
        """Largest total degree a monomial can carry."""
        bound = sum(self.limits)
        return bound if self.cap is None else min(bound, self.cap)

    def constant_term(self):
        return self.terms.get((0,) * len(self.names), 0)

    # -- alignment ----------------------------------------------------
    def _align(self, other):
        if (self.names == other.names and self.limits == other.limits
                and self.cap == other.cap):
            return self, other
        lim = dict(zip(self.names, self.limits))
        for name, l in zip(other.names, other.limits):
            lim[name] = min(l, lim[name]) if name in lim else l
        names = tuple(sorted(lim))
        limits = tuple(lim[n] for n in names)
        caps = [c for c in (self.cap, other.cap) if c is not None]
        cap = min(caps) if caps else None
        return self._rekey(names, limits, cap), other._rekey(names, limits, cap)

    def _rekey(self, names, limits, cap):
        if self.names == names and self.limits == limits and self.cap == cap:
            return self
        pos = [names.index(n) for n in self.names]
        terms = {}
        for exps, c in self.terms.items():
            new = [0] * len(names)
            for p, e in zip(pos, exps):
                new[p] = e
            new = tuple(new)
            if not _exceeds(new, limits, cap):
                terms[new] = c
        return Series(names, limits, terms, cap)

    # -- arithmetic ---------------------------------------------------
    def __neg__(self):
        return self._like({e: -c for e, c in self.terms.items()})

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        if not isinstance(other, Series):
            if other == 0:
                return self
            zero = (0,) * len(self.names)
            terms = dict(self.terms)
            terms[zero] = terms.get(zero, 0) + other
            return self._like(terms)
        a, b = self._align(other)
        terms = dict(a.terms)
        for e, c in b.terms.items():
            terms[e] = terms.get(e, 0) + c
        return a._like(terms)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        if not isinstance(other, Series):
            if other == 0:
                return self._like({})
            return self._like({e: c * other for e, c in self.terms.items()})
        a, b = self._align(other)
        limits, cap = a.limits, a.cap
        terms = {}
        for ea, ca in a.terms.items():
            for eb, cb in b.terms.items():
                e = tuple(x + y for x, y in zip(ea, eb))
                if _exceeds(e, limits, cap):
                    continue
                terms[e] = terms.get(e, 0) + ca * cb
        return a._like(terms)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        if not isinstance(other, Series):
            if other == 0:
                raise MathDomainError("division by zero")
            if isinstance(other, int):
                other = Fraction(other) if self._exact() else float(other)
            return self._like({e: c / other for e, c in self.terms.items()})
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, n):
        if not isinstance(n, int) or n < 0:
            raise ValueError("only non-negative integer powers are supported")
        result = Series.constant(1, self.names, self.limits, self.cap)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def _exact(self):
        return all(not isinstance(c, float) for c in self.terms.values())

    # -- elementary functions -----------------------------------------
    def compose_taylor(self, coeffs):
        """Evaluate ``sum_m coeffs[m] * (self - c0)**m`` where c0 is the constant term.

        ``coeffs`` are the Taylor coefficients of a scalar function at c0;
        only the first ``degree_bound + 1`` of them matter.
        """
        c0 = self.constant_term()
        delta = self - c0
        deg = self.degree_bound
        coeffs = list(coeffs)[: deg + 1]
        result = Series.constant(coeffs[-1], self.names, self.limits, self.cap)
        for a in reversed(coeffs[:-1]):
            result = result * delta + a
        return result

    def reciprocal(self):
        c0 = self.constant_term()
        if c0 == 0:
            raise MathDomainError("division by a series with zero constant term")
        if isinstance(c0, int):
            c0 = Fraction(c0)
        deg = self.degree_bound
        return self.compose_taylor([(-1) ** m / c0 ** (m + 1) for m in range(deg + 1)])

    # -- coefficient access -------------------------------------------
    def coefficient(self, name, power):
        """Coefficient of ``name**power``, as a Series in the remaining variables.

        Returns a plain scalar when no variables remain.
        """
        if name not in self.names:
            return self if power == 0 else 0
        idx = self.names.index(name)
        names = self.names[:idx] + self.names[idx + 1:]
        limits = self.limits[:idx] + self.limits[idx + 1:]
        cap = None if self.cap is None else self.cap - power
        terms = {}
        for e, c in self.terms.items():
            if e[idx] == power:
                terms[e[:idx] + e[idx + 1:]] = c
        if not names:
            return terms.get((), 0)
        return Series(names, limits, terms, cap)

    def monomial(self, powers):
        """Scalar coefficient of the monomial given as ``{name: power}``."""
        key = tuple(powers.get(n, 0) for n in self.names)
        if any(n not in self.names for n, p in powers.items() if p):
            return 0
        return self.terms.get(key, 0)

    def __repr__(self):
        if not self.terms:
            return "Series(0)"
        parts = []
        for e, c in sorted(self.terms.items()):
            mono = "*".join(
                f"{n}^{p}" if p > 1 else n for n, p in zip(self.names, e) if p
            )
            parts.append(f"{c}*{mono}" if mono else f"{c}")
        return "Series(" + " + ".join(parts) + ")"


def divide(value, k):
    """``value / k`` for an integer ``k`` without leaving exact arithmetic."""
    if isinstance(value, int):
        q, r = divmod(value, k)
        return q if r == 0 else Fraction(value, k)
    if isinstance(value, Fraction):
        return value / k
    return value / k


def variable(name, limit, cap=None):
    """The formal variable ``name`` itself, truncated at degree ``limit``."""
    return Series((name,), (limit,), {(1,): 1}, cap)


def constant_part(value):
    return value.constant_term() if isinstance(value, Series) else value


def coefficient(value, name, power):
    if isinstance(value, Series):
        return value.coefficient(name, power)
    return value if power == 0 else 0


# -- scalar/series elementary functions ---------------------------------

def _as_float(x):
    return float(x)


def sin(x):
    if isinstance(x, Series):
        c = _as_float(x.constant_term())
        s, co = math.sin(c), math.cos(c)
        cycle = (s, co, -s, -co)
        return x.compose_taylor(
            [cycle[m % 4] / math.factorial(m) for m in range(x.degree_bound + 1)]
        )
    return math.sin(_as_float(x))


def cos(x):
    if isinstance(x, Series):
        c = _as_float(x.constant_term())
        s, co = math.sin(c), math.cos(c)
        cycle = (co, -s, -co, s)
        return x.compose_taylor(
            [cycle[m % 4] / math.factorial(m) for m in range(x.degree_bound + 1)]
        )
    return math.cos(_as_float(x))


def exp(x):
    if isinstance(x, Series):
        e = math.exp(_as_float(x.constant_term()))
        return x.compose_taylor(
            [e / math.factorial(m) for m in range(x.degree_bound + 1)]
        )
    return math.exp(_as_float(x))


def log(x):
    c = _as_float(constant_part(x))
    if c <= 0:
        raise MathDomainError(f"log of non-positive value {c!r}")
    if isinstance(x, Series):
        coeffs = [math.log(c)] + [
            (-1) ** (m - 1) / (m * c**m) for m in range(1, x.degree_bound + 1)
        ]
        return x.compose_taylor(coeffs)
    return math.log(c)


def sqrt(x):
    c = _as_float(constant_part(x))
    if isinstance(x, Series):
        if c <= 0:
            raise MathDomainError(f"sqrt is not differentiable at {c!r}")
        coeffs = []
        binom = 1.0
        for m in range(x.degree_bound + 1):
            coeffs.append(binom * c ** (0.5 - m))
            binom *= (0.5 - m) / (m + 1)
        return x.compose_taylor(coeffs)
    if c < 0:
        raise MathDomainError(f"sqrt of negative value {c!r}")
    return math.sqrt(c)
