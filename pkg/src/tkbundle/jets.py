"""Points of T^kM in natural coordinates and the higher-order chain rule."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import series as S
from .expr import DerivativeTower

__all__ = [
    "Partition",
    "NaturalJet",
    "TangentOfTk",
    "partitions_of_order",
    "faa_di_bruno_coefficient",
    "compose_jet",
    "truncate",
]


@dataclass(frozen=True)
class Partition:
    """Non-decreasing tuple of positive integers ``l_1 <= ... <= l_i``."""

    parts: tuple

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts or any(p < 1 for p in parts) or list(parts) != sorted(parts):
            raise ValueError(f"not a partition: {parts}")
        object.__setattr__(self, "parts", parts)

    @property
    def k(self):
        return sum(self.parts)

    @property
    def length(self):
        return len(self.parts)

    @property
    def multiplicities(self):
        """``(m_1, ..., m_k)``: how many parts equal each ``j``."""
        counts = Counter(self.parts)
        return tuple(counts.get(j, 0) for j in range(1, self.k + 1))


def partitions_of_order(k: int) -> list:
    """All partitions of ``k`` in lexicographic order of their part tuples."""
    if k < 1:
        raise ValueError("k must be a positive integer")
    return [Partition(p) for p in _partitions(k)]


@lru_cache(maxsize=None)
def _partitions(k):
    out = []

    def grow(prefix, remaining, smallest):
        if remaining == 0:
            out.append(tuple(prefix))
            return
        for part in range(smallest, remaining + 1):
            grow(prefix + [part], remaining - part, part)

    grow([], k, 1)
    return tuple(sorted(out))


def faa_di_bruno_coefficient(p: Partition) -> int:
    """``k! / (l_1! ... l_i! m_1! ... m_k!)``."""
    denom = 1
    for part in p.parts:
        denom *= math.factorial(part)
    for mult in p.multiplicities:
        denom *= math.factorial(mult)
    value, rem = divmod(math.factorial(p.k), denom)
    assert rem == 0
    return value


@dataclass(frozen=True)
class NaturalJet:
    """``(x; xi_1, ..., xi_k)`` with ``xi_i = gamma^(i)(0) / i!``."""

    base: tuple
    comps: tuple

    def __post_init__(self):
        base = tuple(self.base)
        comps = tuple(tuple(c) for c in self.comps)
        if any(len(c) != len(base) for c in comps):
            raise ValueError("jet components must share the base dimension")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "comps", comps)

    @property
    def order(self):
        return len(self.comps)

    @property
    def dim(self):
        return len(self.base)

    def raw(self, i):
        """``gamma^(i)(0) = i! xi_i``; ``raw(0)`` is the base point."""
        if i == 0:
            return self.base
        f = math.factorial(i)
        return tuple(f * v for v in self.comps[i - 1])

    @classmethod
    def from_raw(cls, derivatives):
        """Build from raw derivatives ``gamma(0), gamma'(0), ..., gamma^(k)(0)``."""
        base, *rest = derivatives
        return cls(base, [tuple(S.divide(v, math.factorial(i + 1)) for v in d)
                          for i, d in enumerate(rest)])

    def curve(self):
        """Coefficients of the polynomial representative ``x + sum xi_i t^i``."""
        return [self.base, *self.comps]


@dataclass(frozen=True)
class TangentOfTk:
    """A tangent vector ``(u; y, eta_1, ..., eta_k)`` to T^kM at ``u``."""

    u: NaturalJet
    y: tuple
    etas: tuple

    def __post_init__(self):
        y = tuple(self.y)
        etas = tuple(tuple(e) for e in self.etas)
        n = self.u.dim
        if len(y) != n or any(len(e) != n for e in etas):
            raise ValueError("vertical data must share the base dimension")
        if len(etas) != self.u.order:
            raise ValueError("need exactly one eta per jet order")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "etas", etas)

    @property
    def order(self):
        return self.u.order


def compose_jet(tower: DerivativeTower, j: NaturalJet) -> NaturalJet:
    """Jet of ``g o gamma`` from the derivative tower of ``g`` at ``gamma(0)``.

    Each raw derivative is the partition sum
    ``(g o gamma)^(r)(0) = sum_p a_p d^i g(x)(gamma^(l_1)(0), ..., gamma^(l_i)(0))``.
    """
    if tower.order < j.order:
        raise ValueError(f"tower of order {tower.order} cannot push a jet of order {j.order}")
    if tower.n != j.dim:
        raise ValueError("tower and jet dimensions differ")
    if any(S.constant_part(a) != S.constant_part(b) for a, b in zip(tower.base, j.base)):
        raise ValueError("tower base point differs from the jet base point")
    raws = [j.raw(i) for i in range(j.order + 1)]
    out = [tower.value]
    for r in range(1, j.order + 1):
        acc = np.zeros(tower.m, dtype=object)
        for p in partitions_of_order(r):
            term = tower.apply(p.length, [raws[l] for l in p.parts])
            acc = acc + faa_di_bruno_coefficient(p) * np.asarray(term, dtype=object)
        out.append(tuple(acc.tolist()))
    return NaturalJet.from_raw(out)


def truncate(j: NaturalJet, i: int) -> NaturalJet:
    """Project ``[gamma, x]_k`` to ``[gamma, x]_i``."""
    if not 1 <= i <= j.order:
        raise ValueError(f"cannot truncate an order-{j.order} jet to order {i}")
    return NaturalJet(j.base, j.comps[:i])
