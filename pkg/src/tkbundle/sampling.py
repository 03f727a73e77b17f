"""Reproducible random sample points for the checks.

Base points are uniform in a margin-shrunk domain box and fibre or vertical
data are uniform in ``[-1, 1]^n``.  The exact backend draws rationals on a
fixed grid so every sample stays in ``Fraction`` arithmetic.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

__all__ = ["make_rng", "draw", "sample_point", "sample_vector", "sample_blocks"]

DEFAULT_SEED = 20240611


def make_rng(seed=None):
    return np.random.default_rng(DEFAULT_SEED if seed is None else seed)


def draw(rng, a, b, backend="float", denom=8):
    """One scalar in ``[a, b]``."""
    if backend == "exact":
        lo = math.ceil(float(a) * denom)
        hi = math.floor(float(b) * denom)
        if lo > hi:
            raise ValueError(f"no grid point of step 1/{denom} in [{a}, {b}]")
        return Fraction(int(rng.integers(lo, hi + 1)), denom)
    return float(rng.uniform(float(a), float(b)))


def sample_point(rng, domain, backend="float", margin=0.05, denom=8):
    """A point of the box ``domain`` kept ``margin`` (fraction of width) from its faces."""
    pts = []
    for lo, hi in domain:
        lo, hi = float(lo), float(hi)
        lo = lo if math.isfinite(lo) else -1.0
        hi = hi if math.isfinite(hi) else 1.0
        width = hi - lo
        pts.append(draw(rng, lo + margin * width, hi - margin * width, backend, denom))
    return tuple(pts)


def sample_vector(rng, n, backend="float", denom=4):
    return tuple(draw(rng, -1.0, 1.0, backend, denom) for _ in range(n))


def sample_blocks(rng, n, k, backend="float", denom=4):
    return tuple(sample_vector(rng, n, backend, denom) for _ in range(k))
