import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from builders import constant_christoffel, random_christoffel_exprs, random_poly_source, random_rational
from tkbundle.connections import Christoffel, lift_connection
from tkbundle.expr import MapSpec, derivative_tensor
from tkbundle.oracle import (
    NotPolynomialError, PolySeries, finite_difference_tensor, lemma_A1_check, lemma_A2_check,
    poly_compose_oracle, poly_eval,
)
from tkbundle.trivialization import build_mu


def rvec(rng, n):
    return tuple(random_rational(rng) for _ in range(n))


def random_poly(rng, n, m, degree=3):
    return MapSpec.parse([random_poly_source(rng, n, degree) for _ in range(m)], n, backend="exact")


class TestPolySeries:
    def test_degree_bound(self):
        t = PolySeries.var(1, 3, 0)
        p = (1 + t) ** 5
        assert [p.coefficient((i,)) for i in range(4)] == [1, 5, 10, 10]
        with pytest.raises(ValueError):
            p.coefficient((4,))

    def test_bivariate_truncation(self):
        t, s = PolySeries.var(2, 2, 0), PolySeries.var(2, 2, 1)
        p = (t + s) ** 3
        assert all(v == 0 for v in p.coeffs.ravel())

    def test_rejects_transcendental_and_rational_functions(self):
        with pytest.raises(NotPolynomialError):
            poly_eval(MapSpec.parse(["sin(x1)"], 1).exprs[0], [PolySeries.var(1, 2, 0)], 1, 2)
        with pytest.raises(NotPolynomialError):
            poly_eval(MapSpec.parse(["1/x1"], 1).exprs[0], [PolySeries.var(1, 2, 0)], 1, 2)


class TestComposeOracle:
    def test_square(self):
        g = MapSpec.parse(["x1^2"], 1, backend="exact")
        assert [d[0] for d in poly_compose_oracle(g, [(0,), (1,), (1,)], 3)] == [0, 0, 2, 12]

    def test_constant(self):
        g = MapSpec.parse(["7/2"], 1, backend="exact")
        out = poly_compose_oracle(g, [(1,), (2,), (3,)], 4)
        assert out[0] == (Fraction(7, 2),) and all(d == (0,) for d in out[1:])

    def test_division_by_constant(self):
        g = MapSpec.parse(["x1^2/4"], 1, backend="exact")
        assert poly_compose_oracle(g, [(0,), (2,)], 2)[2] == (2,)


class TestFiniteDifferences:
    def test_linear(self):
        m = MapSpec.parse(["2*x1 - x2", "3*x2"], 2, [(-1, 1), (-1, 1)])
        assert np.allclose(finite_difference_tensor(m, (0.1, 0.2), 1), [[2, -1], [0, 3]], atol=1e-9)

    def test_bilinear_second_order(self):
        m = MapSpec.parse(["x1*x2"], 2, [(-1, 1), (-1, 1)])
        fd = finite_difference_tensor(m, (0.3, 0.4), 2, h=1e-4)
        assert abs(fd[0, 0, 1] - 1) <= 1e-6

    def test_margin(self):
        m = MapSpec.parse(["x1"], 1, [(0, 1)])
        with pytest.raises(ValueError):
            finite_difference_tensor(m, (1e-6,), 1)

    def test_agrees_with_derivative_tensor(self):
        m = MapSpec.parse(["exp(x1)*cos(x2)", "sqrt(2+x1)*x2"], 2, [(-1, 1), (-1, 1)])
        x = (-0.2, 0.6)
        for order in (1, 2):
            exact = np.array(derivative_tensor(m, x, order), dtype=float)
            fd = finite_difference_tensor(m, x, order)
            assert np.abs(exact - fd).max() <= 1e-6 * max(1, np.abs(exact).max())


class TestLemmaA1:
    def test_identity(self):
        C = lift_connection(constant_christoffel(2), 4)
        rec = lemma_A1_check(MapSpec.identity(1, backend="exact"), C, (0,), [(1,), (2,), (3,), (4,)], 4)
        assert rec.passed

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 5))
    def test_flat_components(self, seed, k):
        rng = np.random.default_rng(seed)
        f = random_poly(rng, 2, 2)
        C = lift_connection(Christoffel.flat(2), k)
        rec = lemma_A1_check(f, C, rvec(rng, 2), [rvec(rng, 2) for _ in range(k)], k)
        assert rec.passed and rec.max_abs_residual == 0

    def test_curved_components(self):
        rng = np.random.default_rng(11)
        f = random_poly(rng, 1, 1)
        C = lift_connection(constant_christoffel(Fraction(3, 2)), 3)
        rec = lemma_A1_check(f, C, (Fraction(1, 2),), [(1,), (-2,), (Fraction(1, 3),)], 3)
        assert rec.passed

    def test_base_term_is_required(self):
        """Starting the two-parameter curve at ``t^1`` breaks the identity."""
        rng = np.random.default_rng(3)
        k = 3
        f = MapSpec.parse(["x1^3 + x1*x2", "x2^2"], 2, backend="exact")
        C = lift_connection(Christoffel.from_exprs(random_christoffel_exprs(rng, 2), 2, backend="exact"), k)
        x, fib = (1, Fraction(1, 2)), [(1, 2), (-1, 1), (2, 0)]
        assert lemma_A1_check(f, C, x, fib, k).passed
        c = [tuple(Fraction(v) for v in cc) for cc in build_mu(C, x, fib).coeffs]
        t, s = PolySeries.var(2, k, 0), PolySeries.var(2, k, 1)
        truncated = [sum(((t**i) * (s * ((i + 1) * c[i + 1][a]) + c[i][a]) for i in range(1, k)),
                         PolySeries(2, k)) for a in range(2)]
        lhs = [math.factorial(k - 1) * poly_eval(e, truncated, 2, k).coefficient((k - 1, 1))
               for e in f.exprs]
        assert lhs != list(poly_compose_oracle(f, c, k)[k])

    def test_needs_order_two(self):
        with pytest.raises(ValueError):
            lemma_A1_check(MapSpec.identity(1, backend="exact"), lift_connection(Christoffel.flat(1), 1),
                           (0,), [(1,)], 1)


class TestLemmaA2:
    def test_identity(self):
        rec = lemma_A2_check(MapSpec.identity(2, backend="exact"), (0, 1), (1, 1),
                             [(1, 0), (0, 1), (1, 1)], [1, 2, 3], 3)
        assert rec.passed

    @settings(max_examples=8, deadline=None)
    @given(st.integers(0, 10_000))
    def test_cubic_all_j(self, seed):
        rng = np.random.default_rng(seed)
        f = random_poly(rng, 2, 2, degree=3)
        rec = lemma_A2_check(f, rvec(rng, 2), rvec(rng, 2), [rvec(rng, 2) for _ in range(3)],
                             range(1, 4), 3)
        assert rec.passed and rec.max_abs_residual == 0

    def test_mixed_terms(self):
        f = MapSpec.parse(["x1^2*x2", "x1*x2 - x2^3"], 2, backend="exact")
        rng = np.random.default_rng(9)
        rec = lemma_A2_check(f, rvec(rng, 2), rvec(rng, 2), [rvec(rng, 2) for _ in range(4)], 2, 4)
        assert rec.passed

    def test_j_range(self):
        with pytest.raises(ValueError):
            lemma_A2_check(MapSpec.identity(1, backend="exact"), (0,), (1,), [(1,)], 2, 1)
