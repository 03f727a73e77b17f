import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tkbundle.expr import (
    Add, ArityError, BackendError, Const, Div, DomainViolation, Func, MapSpec, MathDomainError,
    Mul, Neg, ParseError, Pow, UnknownIdentifierError, Var, contract, derivative_tensor,
    derivative_tower, eval_map, inverse_point, jacobian, parse_expr, second_derivative,
    taylor_push,
)
from tkbundle.oracle import finite_difference_tensor


class TestParse:
    def test_sum_with_power(self):
        assert parse_expr("x1 + x2^2", 2) == Add(Var(1), Pow(Var(2), 2))

    def test_function_times_variable(self):
        assert parse_expr("sin(x1)*x1", 1) == Mul(Func("sin", Var(1)), Var(1))

    def test_arity_violation(self):
        with pytest.raises(ArityError):
            parse_expr("x3", 2)

    def test_rational_and_decimal_literals(self):
        assert parse_expr("3/4", 1) == Const(Fraction(3, 4))
        assert parse_expr("0.25", 1) == Const(Fraction(1, 4))

    def test_division_after_power(self):
        assert parse_expr("x1^2/4", 1) == Div(Pow(Var(1), 2), Const(Fraction(4)))

    def test_unary_minus(self):
        assert parse_expr("-x1^2", 1) == Neg(Pow(Var(1), 2))

    def test_syntax_error_reports_byte_offset(self):
        with pytest.raises(ParseError) as err:
            parse_expr("x1 + * x2", 2)
        assert err.value.offset == 5

    def test_offset_counts_bytes_not_characters(self):
        with pytest.raises(ParseError) as err:
            parse_expr("x1 + é", 1)
        assert err.value.offset == 5
        with pytest.raises(ParseError) as err:
            parse_expr("(x1 é", 1)
        assert err.value.offset == 4

    def test_unknown_identifier(self):
        with pytest.raises(UnknownIdentifierError):
            parse_expr("tan(x1)", 1)

    def test_exponent_must_be_integer(self):
        with pytest.raises(ParseError):
            parse_expr("x1^x1", 1)
        with pytest.raises(ParseError):
            parse_expr("x1^1.5", 1)

    def test_exact_backend_rejects_transcendentals(self):
        with pytest.raises(BackendError):
            parse_expr("exp(x1)", 1, backend="exact")

    def test_unbalanced(self):
        with pytest.raises(ParseError):
            parse_expr("(x1 + 1", 1)


class TestEval:
    def test_polynomial_map(self):
        m = MapSpec.parse(["x1^2", "x1+x2"], 2, backend="exact")
        assert eval_map(m, (2, 1)) == (4, 3)

    def test_identity(self):
        m = MapSpec.identity(3)
        assert eval_map(m, (0.5, -1.0, 2.0)) == (0.5, -1.0, 2.0)

    def test_log_of_negative(self):
        with pytest.raises(MathDomainError):
            eval_map(MapSpec.parse(["log(x1)"], 1), (-1.0,))

    def test_division_by_zero(self):
        with pytest.raises(MathDomainError):
            eval_map(MapSpec.parse(["1/x1"], 1, backend="exact"), (0,))

    def test_domain_violation(self):
        m = MapSpec.parse(["x1"], 1, domain=[(0, 1)])
        with pytest.raises(DomainViolation):
            eval_map(m, (2.0,))

    def test_exact_backend_refuses_floats(self):
        with pytest.raises(BackendError):
            eval_map(MapSpec.parse(["x1"], 1, backend="exact"), (0.5,))

    def test_degenerate_domain(self):
        with pytest.raises(ValueError):
            MapSpec.parse(["x1"], 1, domain=[(1, 1)])


class TestTaylorPush:
    def test_square_of_curve(self):
        m = MapSpec.parse(["x1^2"], 1, backend="exact")
        assert [d[0] for d in taylor_push(m, [(0,), (1,), (1,)], 3)] == [0, 0, 2, 12]

    def test_identity_returns_raw_derivatives(self):
        m = MapSpec.identity(2, backend="exact")
        curve = [(1, 2), (3, 4), (5, 6)]
        out = taylor_push(m, curve, 2)
        assert out == [(1, 2), (3, 4), (10, 12)]

    def test_linear_map(self):
        m = MapSpec.parse(["2*x1 - x2", "x1 + 3*x2"], 2, backend="exact")
        curve = [(0, 0), (1, 1), (2, -1), (1, 0)]
        out = taylor_push(m, curve, 3)
        A = np.array([[2, -1], [1, 3]])
        for i in range(1, 4):
            assert out[i] == tuple(math.factorial(i) * A.dot(curve[i]))


class TestDerivativeTensor:
    def test_bilinear_product(self):
        T = derivative_tensor(MapSpec.parse(["x1*x2"], 2, backend="exact"), (0, 0), 2)
        assert T[0, 0, 1] == 1 and T[0, 1, 0] == 1
        assert T[0, 0, 0] == 0 and T[0, 1, 1] == 0

    def test_linear_second_derivative_vanishes(self):
        T = derivative_tensor(MapSpec.parse(["2*x1 - x2"], 2, backend="exact"), (1, 1), 2)
        assert all(v == 0 for v in T.ravel())

    def test_first_order_matches_finite_differences(self):
        m = MapSpec.parse(["sin(x1)*exp(x2)", "x1/(1+x2^2)"], 2, domain=[(-1, 1), (-1, 1)])
        x = (0.3, -0.2)
        J = np.array(derivative_tensor(m, x, 1), dtype=float)
        assert np.allclose(J, finite_difference_tensor(m, x, 1), rtol=0, atol=1e-6)

    def test_second_order_matches_finite_differences(self):
        m = MapSpec.parse(["sin(x1)*exp(x2)", "log(2+x1*x2)"], 2, domain=[(-1, 1), (-1, 1)])
        x = (0.3, -0.2)
        H = np.array(derivative_tensor(m, x, 2), dtype=float)
        fd = finite_difference_tensor(m, x, 2, h=1e-5)
        assert np.abs(H - fd).max() <= 1e-6 * max(1.0, np.abs(H).max())

    def test_diagonal_agrees_with_taylor_push(self):
        m = MapSpec.parse(["x1^3*x2 - x2^2", "x1*x2^2"], 2, backend="exact")
        x, v = (Fraction(1, 2), 2), (3, -1)
        T = derivative_tensor(m, x, 3)
        raw = taylor_push(m, [x, v], 3)[3]
        assert contract(T, [v, v, v]) == raw

    def test_jacobian_and_hessian_helpers_agree(self):
        m = MapSpec.parse(["x1^2*x2", "x2^3 - x1"], 2, backend="exact")
        x = (2, Fraction(1, 3))
        tower = derivative_tower(m, x, 2)
        assert (jacobian(m, x) == tower.tensors[0]).all()
        assert (second_derivative(m, x) == tower.tensors[1]).all()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 4))
def test_tensor_symmetry_exact(seed, order):
    rng = np.random.default_rng(seed)
    m = MapSpec.parse(["x1^3*x2 + x3^2*x1 - 2*x2*x3", "x1*x2*x3 + x3^4"], 3, backend="exact")
    x = tuple(Fraction(int(v), 3) for v in rng.integers(-3, 4, 3))
    T = derivative_tensor(m, x, order)
    vecs = [tuple(int(v) for v in rng.integers(-2, 3, 3)) for _ in range(order)]
    ref = contract(T, vecs)
    for perm in itertools.permutations(vecs):
        assert contract(T, perm) == ref


def test_tensor_symmetry_float():
    m = MapSpec.parse(["sin(x1*x2)+exp(x3)*x1"], 3)
    T = np.array(derivative_tensor(m, (0.2, 0.4, -0.1), 3), dtype=float)
    for perm in itertools.permutations(range(1, 4)):
        assert np.allclose(T, np.transpose(T, (0,) + perm), rtol=1e-10, atol=1e-12)


def test_inverse_point_recovers_preimage():
    m = MapSpec.parse(["x1^3 + x1"], 1, domain=[(-1, 1)])
    x = inverse_point(m, (0.5,))
    assert abs(m(x)[0] - 0.5) < 1e-13
