import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import minimize

from dynpricer import (Box, CappedSimplex, InfeasibleShrinkError, InvalidArgumentError, PriceBall,
                       Simplex, project, shrunk_box, shrunk_set)

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


class TestProject:
    def test_box_clamps(self):
        np.testing.assert_array_equal(project(Box([0, 0], [1, 1]), [1.5, -0.2]), [1.0, 0.0])

    def test_simplex_symmetric_point(self):
        np.testing.assert_allclose(project(Simplex(3), [0.5, 0.5, 0.5]), np.full(3, 1 / 3))

    def test_interior_fixed_point(self):
        np.testing.assert_array_equal(project(Box([0], [1]), [0.25]), [0.25])

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            project(Box([0, 0], [1, 1]), [0.5])
        with pytest.raises(InvalidArgumentError):
            project(Simplex(3), [0.5, 0.5])

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidArgumentError):
            project(Box([0], [1]), [np.nan])

    def test_batch_matches_rows(self, rng):
        F = Simplex(4)
        Y = rng.normal(size=(50, 4))
        np.testing.assert_allclose(F.project(Y), np.array([F.project(y) for y in Y]))

    @pytest.mark.parametrize("F", [Box([0, -1, 0], [1, 1, 2]), Simplex(3),
                                   CappedSimplex([0.1, 0.1, 0.1], [0.5, 0.9, 0.9])])
    def test_nonexpansive(self, F, rng):
        A = rng.normal(scale=2.0, size=(10_000, 3))
        B = rng.normal(scale=2.0, size=(10_000, 3))
        lhs = np.linalg.norm(F.project(A) - F.project(B), axis=1)
        rhs = np.linalg.norm(A - B, axis=1)
        assert np.all(lhs <= rhs + 1e-9)

    @pytest.mark.parametrize("F", [Box([0, -1, 0], [1, 1, 2]), Simplex(3),
                                   CappedSimplex([0.1, 0.1, 0.1], [0.5, 0.9, 0.9])])
    def test_idempotent_and_feasible(self, F, rng):
        X = F.project(rng.normal(scale=3.0, size=(500, 3)))
        assert F.contains(X)
        np.testing.assert_allclose(F.project(X), X, atol=1e-12)

    def test_capped_simplex_matches_generic_solver(self, rng):
        F = CappedSimplex([0.05, 0.05, 0.05], [0.4, 1.0, 0.7])
        cons = [{"type": "eq", "fun": lambda x: x.sum() - 1.0}]
        for y in rng.normal(scale=1.5, size=(10, 3)):
            ref = minimize(lambda x: ((x - y) ** 2).sum(), F.center(), method="SLSQP",
                           bounds=list(zip(F.lower, F.upper)), constraints=cons,
                           options={"ftol": 1e-14}).x
            np.testing.assert_allclose(F.project(y), ref, atol=1e-6)

    @settings(max_examples=200, deadline=None)
    @given(arrays(float, 5, elements=finite))
    def test_simplex_output_is_distribution(self, y):
        x = Simplex(5).project(y)
        assert np.all(x >= 0)
        assert abs(x.sum() - 1.0) <= 1e-9


class TestPriceBall:
    def test_projection_is_orthant_then_radial(self):
        ball = PriceBall(1.0, 2)
        np.testing.assert_allclose(ball.project([3.0, -4.0]), [1.0, 0.0])
        np.testing.assert_allclose(ball.project([3.0, 4.0]), [0.6, 0.8])
        np.testing.assert_array_equal(ball.project([0.1, 0.2]), [0.1, 0.2])

    def test_matches_generic_solver(self, rng):
        ball = PriceBall(2.0, 3)
        cons = [{"type": "ineq", "fun": lambda x: 4.0 - x @ x}]
        for y in rng.normal(scale=3.0, size=(10, 3)):
            ref = minimize(lambda x: ((x - y) ** 2).sum(), np.full(3, 0.1), method="SLSQP",
                           bounds=[(0, None)] * 3, constraints=cons, options={"ftol": 1e-14}).x
            np.testing.assert_allclose(ball.project(y), ref, atol=1e-6)


class TestBox:
    def test_requires_lower_below_upper(self):
        with pytest.raises(InvalidArgumentError):
            Box([0, 1], [1, 1])

    def test_norm_bound_covers_set(self, rng):
        F = Box([-2, 0], [1, 3])
        X = rng.uniform(F.lower, F.upper, size=(1000, 2))
        assert np.linalg.norm(X, axis=1).max() <= F.norm_bound

    def test_membership_tolerance(self):
        F = Box([0], [1])
        assert F.contains([1 + 5e-10])
        assert not F.contains([1 + 1e-8])


class TestShrunkBox:
    def test_two_goods(self):
        B = shrunk_box(Box([0, 0], [1, 1]), [1, 1], 0.1)
        np.testing.assert_allclose(B.lower, [0.1, 0.1])
        np.testing.assert_allclose(B.upper, [0.9, 0.9])

    def test_supply_cap(self):
        B = shrunk_box(Box([0], [1]), [0.5], 0.05)
        np.testing.assert_allclose(B.lower, [0.05])
        np.testing.assert_allclose(B.upper, [0.45])

    def test_empty_reports_coordinate(self):
        with pytest.raises(InfeasibleShrinkError) as err:
            shrunk_box(Box([0, 0], [1, 1]), [1.0, 0.1], 0.2)
        assert err.value.coordinate == 1

    def test_rejects_simplex(self):
        with pytest.raises(InvalidArgumentError):
            shrunk_box(Simplex(2), [1, 1], 0.1)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0.1, 2.0), st.floats(0.1, 2.0), st.floats(0.001, 0.04))
    def test_members_respect_supply(self, s1, s2, xi):
        F = Box([0, 0], [1, 1])
        s = np.array([s1, s2])
        B = shrunk_box(F, s, xi)
        X = B.project(np.random.default_rng(0).normal(size=(200, 2)) * 3)
        assert F.contains(X)
        assert np.all(X <= s - xi)
        assert np.all(X >= xi)


class TestShrunkSet:
    def test_simplex_becomes_capped(self):
        S = shrunk_set(Simplex(3), [0.5, 1.0, 1.0], 0.05)
        assert isinstance(S, CappedSimplex)
        np.testing.assert_allclose(S.lower, [0.05] * 3)
        np.testing.assert_allclose(S.upper, [0.45, 0.95, 0.95])
        c = S.center()
        assert S.contains(c)
        assert np.all(c > 0)

    def test_empty_capped_simplex(self):
        with pytest.raises(InvalidArgumentError):
            CappedSimplex([0.5, 0.6], [1, 1])
