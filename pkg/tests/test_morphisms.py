import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from builders import (
    polar_christoffel, polar_map, random_christoffel_exprs, random_poly_source, random_rational,
    rotation, round_metric,
)
from tkbundle.connections import Christoffel, lift_connection
from tkbundle.expr import MapSpec
from tkbundle.jets import NaturalJet, TangentOfTk
from tkbundle.metrics import levi_civita
from tkbundle.morphisms import (
    MorphismScenario, auxiliary_pushforward, check_fibre_linearity, check_g_related_global,
    check_g_related_local, check_projective_consistency, pushforward_lifted, pushforward_natural,
    tangent_pushforward, verify_lifted_relatedness,
)
from tkbundle.sampling import make_rng
from tkbundle.trivialization import LiftedCoordinates

SQUARE = [(-1, 1), (-1, 1)]


def rvec(rng, n):
    return tuple(random_rational(rng) for _ in range(n))


def sphere_scenario(k):
    C = lift_connection(levi_civita(round_metric()), k)
    return MorphismScenario(rotation(), C, C, k, inverse=rotation([(-4, 4), (-4, 4)], inverse=True))


def flat_scenario(g, k):
    C = lift_connection(Christoffel.flat(g.n), k)
    return MorphismScenario(g, C, lift_connection(Christoffel.flat(g.m), k), k)


class TestPushforwardNatural:
    def test_identity(self):
        j = NaturalJet((1, 2), [(3, 4), (5, 6)])
        assert pushforward_natural(MapSpec.identity(2, backend="exact"), j) == j

    def test_square(self):
        g = MapSpec.parse(["x1^2"], 1, backend="exact")
        out = pushforward_natural(g, NaturalJet((0,), [(1,), (1,)]))
        assert out.comps == ((0,), (1,))
        assert out.raw(2) == (2,)

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 10_000))
    def test_functoriality_through_inverse(self, seed):
        """The rotation followed by its inverse is the identity on jets."""
        rng = np.random.default_rng(seed)
        x = tuple(float(v) for v in rng.uniform(-0.5, 0.5, 2))
        j = NaturalJet(x, [tuple(rng.uniform(-1, 1, 2)) for _ in range(3)])
        wide = [(-4, 4), (-4, 4)]
        back = pushforward_natural(rotation(wide, inverse=True), pushforward_natural(rotation(), j))
        assert np.allclose(np.array([back.base, *back.comps], dtype=float),
                           np.array([j.base, *j.comps], dtype=float), atol=1e-12)


class TestLiftedPushforward:
    def test_identity_same_connection(self):
        rng = np.random.default_rng(0)
        G = Christoffel.from_exprs(random_christoffel_exprs(rng, 2), 2, backend="exact")
        C = lift_connection(G, 3)
        s = MorphismScenario(MapSpec.identity(2, backend="exact"), C, C, 3)
        L = LiftedCoordinates(rvec(rng, 2), [rvec(rng, 2) for _ in range(3)])
        assert pushforward_lifted(s, L) == L

    def test_rotation_is_block_diagonal(self):
        rec = check_fibre_linearity(sphere_scenario(3), 20, make_rng(1), 1e-7)
        assert rec.passed

    def test_diffeomorphism_round_trip(self):
        s = sphere_scenario(3)
        back = MorphismScenario(s.inverse, s.target, s.source, 3)
        L = LiftedCoordinates((0.2, -0.3), [(0.5, 0.1), (-0.4, 0.7), (0.3, 0.3)])
        out = pushforward_lifted(back, pushforward_lifted(s, L))
        assert np.allclose(np.array(out.fibre, dtype=float), np.array(L.fibre), atol=1e-12)

    def test_unrelated_is_nonlinear(self):
        g = MapSpec.parse(["x1 + x2^2", "x2 + x1^3"], 2, SQUARE)
        s = MorphismScenario(g, lift_connection(Christoffel.flat(2), 2),
                             lift_connection(levi_civita(round_metric()), 2), 2)
        rec = check_fibre_linearity(s, 20, make_rng(2), 1e-7)
        assert not rec.passed and rec.details["additivity_abs"] >= 1e-2


class TestRelatedness:
    def test_flat_linear_exact(self):
        g = MapSpec.parse(["2*x1 - x2", "x1 + 3*x2"], 2, SQUARE, backend="exact")
        s = flat_scenario(g, 3)
        for check in (check_g_related_global, check_g_related_local):
            rec = check(s, 10, make_rng(0))
            assert rec.passed and rec.max_abs_residual == 0

    @pytest.mark.parametrize("check", [check_g_related_global, check_g_related_local])
    def test_sphere_rotation(self, check):
        rec = check(sphere_scenario(3), 15, make_rng(3), 1e-7)
        assert rec.passed

    @pytest.mark.parametrize("check", [check_g_related_global, check_g_related_local])
    def test_flat_to_curved_fails(self, check):
        g = MapSpec.parse(["x1 + x2^2", "x2 - x1^2"], 2, SQUARE)
        s = MorphismScenario(g, lift_connection(Christoffel.flat(2), 2),
                             lift_connection(levi_civita(round_metric()), 2), 2)
        rec = check(s, 10, make_rng(4))
        assert not rec.passed and rec.max_abs_residual > 1e-2

    def test_order_one_is_classical_condition(self):
        """Block 1 of both sides is ``dg(eta + Gamma(xi, y))`` against ``dg eta + d2g(xi, y)``."""
        g = MapSpec.parse(["x1^2 + x2", "x1*x2"], 2, SQUARE, backend="exact")
        rng = np.random.default_rng(5)
        u = NaturalJet(rvec(rng, 2), [rvec(rng, 2)])
        t = TangentOfTk(u, rvec(rng, 2), [rvec(rng, 2)])
        bar = auxiliary_pushforward(g, t)
        x, xi, y, eta = u.base, u.comps[0], t.y, t.etas[0]
        J = np.array([[2 * x[0], 1], [x[1], x[0]]], dtype=object)
        d2 = (2 * xi[0] * y[0], xi[0] * y[1] + xi[1] * y[0])
        expected = tuple(J.dot(np.array(eta, dtype=object)) + np.array(d2, dtype=object))
        assert bar.etas[0] == expected

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 10_000))
    def test_global_and_local_barred_data_agree(self, seed):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(1, 4))
        g = MapSpec.parse([random_poly_source(rng, 2, 3) for _ in range(2)], 2, backend="exact")
        u = NaturalJet(rvec(rng, 2), [rvec(rng, 2) for _ in range(k)])
        t = TangentOfTk(u, rvec(rng, 2), [rvec(rng, 2) for _ in range(k)])
        assert tangent_pushforward(g, t) == auxiliary_pushforward(g, t)


class TestLiftedRelatedness:
    def test_flat_linear_exact(self):
        g = MapSpec.parse(["x1 - x2", "x2"], 2, SQUARE, backend="exact")
        rec = verify_lifted_relatedness(Christoffel.flat(2), Christoffel.flat(2), g, 3, 5, make_rng(0))
        assert rec.passed and rec.max_abs_residual == 0

    def test_polar_to_cartesian(self):
        rec = verify_lifted_relatedness(polar_christoffel(), Christoffel.flat(2), polar_map(), 3, 15,
                                        make_rng(1), 1e-6)
        assert rec.passed
        assert set(rec.details) >= {"order_1_abs", "order_2_abs", "order_3_abs"}

    def test_hypothesis_violation_reported(self):
        rec = verify_lifted_relatedness(Christoffel.flat(2), Christoffel.flat(2), polar_map(), 3, 5,
                                        make_rng(2), 1e-6)
        assert not rec.passed
        assert rec.diagnostic.startswith("hypothesis violated")
        assert "order_2_abs" not in rec.details


class TestProjectiveConsistency:
    def test_natural_exact(self):
        rng = np.random.default_rng(6)
        g = MapSpec.parse([random_poly_source(rng, 2, 3) for _ in range(2)], 2, backend="exact")
        jets = [NaturalJet(rvec(rng, 2), [rvec(rng, 2) for _ in range(5)]) for _ in range(4)]
        rec = check_projective_consistency(g, jets)
        assert rec.passed and rec.max_abs_residual == 0

    def test_lifted_rotation(self):
        s = sphere_scenario(3)
        jets = [NaturalJet((0.1, -0.2), [(0.3, 0.4), (-0.5, 0.2), (0.1, 0.1)])]
        rec = check_projective_consistency(s.g, jets, s.source, s.target, 1e-8)
        assert rec.passed and rec.details["lifted"]

    def test_needs_order_two(self):
        with pytest.raises(ValueError):
            check_projective_consistency(MapSpec.identity(1), [NaturalJet((0.0,), [(1.0,)])])


def test_scenario_validation():
    C = lift_connection(Christoffel.flat(2), 2)
    with pytest.raises(ValueError):
        MorphismScenario(MapSpec.identity(2), C, C, 3)
    with pytest.raises(ValueError):
        MorphismScenario(MapSpec.identity(1), C, C, 1)
    assert MorphismScenario(MapSpec.identity(2, backend="exact"), C, C, 2).tolerance(1e-6) == 0
