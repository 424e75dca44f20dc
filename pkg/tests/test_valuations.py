import numpy as np
import pytest

from dynpricer import (Box, EntropyRegularized, InvalidArgumentError, LinearUnitDemand, Quadratic,
                       SeparablePower, Simplex, SingularGradientError, buyer_response,
                       regularized_response, unit_demand_choice)
from dynpricer.valuations import entropy, gradient, value


def _random_valuation(rng, d):
    if rng.random() < 0.5:
        return SeparablePower(rng.uniform(0.2, 2.0, d), rng.uniform(0.2, 0.9))
    M = rng.normal(size=(d, d))
    return Quadratic(rng.uniform(0.5, 3.0, d), M @ M.T + 0.5 * np.eye(d))


class TestValue:
    def test_sqrt(self):
        assert value(SeparablePower([1.0], 0.5), [0.25]) == pytest.approx(0.5)

    def test_quadratic_at_origin(self):
        assert value(Quadratic([1.0, 2.0], np.eye(2)), [0.0, 0.0]) == 0.0

    def test_weighted_sqrt(self):
        assert value(SeparablePower([2.0, 1.0], 0.5), [1.0, 4.0]) == pytest.approx(4.0)

    def test_negative_rejected(self):
        with pytest.raises(InvalidArgumentError):
            value(SeparablePower([1.0], 0.5), [-0.1])

    def test_monotone(self, rng):
        v = SeparablePower([1.0, 0.5, 2.0], 0.4)
        X = rng.uniform(0, 1, size=(500, 3))
        Y = X + rng.uniform(0, 0.2, size=X.shape)
        assert np.all(v.value(Y) >= v.value(X))


class TestGradient:
    def test_sqrt(self):
        np.testing.assert_allclose(gradient(SeparablePower([1.0], 0.5), [0.25]), [1.0])

    def test_quadratic(self):
        a = np.array([1.0, -2.0])
        Q = np.array([[2.0, 0.5], [0.5, 1.0]])
        v = Quadratic(a, Q)
        np.testing.assert_allclose(gradient(v, [0, 0]), a)
        x = np.array([0.3, 0.7])
        np.testing.assert_allclose(gradient(v, x), a - Q @ x)

    def test_two_goods(self):
        np.testing.assert_allclose(gradient(SeparablePower([1, 1], 0.5), [1, 1]), [0.5, 0.5])

    def test_singular_at_zero(self):
        with pytest.raises(SingularGradientError):
            gradient(SeparablePower([1.0, 1.0], 0.5), [0.0, 1.0])

    def test_finite_differences(self, rng):
        h = 1e-5
        for _ in range(1000):
            d = int(rng.integers(1, 4))
            v = _random_valuation(rng, d)
            x = rng.uniform(0.05, 1.0, d)
            E = np.eye(d) * h
            fd = np.array([(v.value(x + e) - v.value(x - e)) / (2 * h) for e in E])
            np.testing.assert_allclose(v.gradient(x), fd, rtol=1e-4, atol=1e-7)

    def test_entropy_regularized(self, rng):
        v = EntropyRegularized(np.array([1.0, 0.3, 0.0]), 0.4)
        x = np.array([0.2, 0.5, 0.3])
        h = 1e-6
        fd = np.array([(v.value(x + e) - v.value(x - e)) / (2 * h) for e in np.eye(3) * h])
        np.testing.assert_allclose(v.gradient(x), fd, rtol=1e-5)


class TestBuyerResponse:
    def test_sqrt_market(self):
        np.testing.assert_allclose(buyer_response(SeparablePower([1.0], 0.5), [1.0], Box([0], [1])),
                                   [0.25])

    def test_clamped(self):
        np.testing.assert_allclose(buyer_response(SeparablePower([1.0], 0.5), [0.25], Box([0], [1])),
                                   [1.0])

    def test_prohibitive_prices(self):
        v = SeparablePower([1.0, 2.0], 0.5)
        x = buyer_response(v, [1e6, 1e6], Box([0, 0], [1, 1]))
        assert np.all(x <= 1e-11)

    def test_generic_solver_matches_closed_form(self, rng):
        v = SeparablePower([1.0, 0.7], 0.5)
        for p in rng.uniform(0.5, 3.0, size=(10, 2)):
            closed = v.response(p, Box([0, 0], [1, 1]))
            generic = super(SeparablePower, v).response(p, Box([0.01, 0.01], [1, 1]))
            np.testing.assert_allclose(generic, np.maximum(closed, 0.01), atol=1e-6)

    def test_negative_price_rejected(self):
        with pytest.raises(InvalidArgumentError):
            buyer_response(SeparablePower([1.0], 0.5), [-1.0], Box([0], [1]))

    def test_optimality_against_random_bundles(self, rng):
        for _ in range(1000):
            d = int(rng.integers(1, 4))
            v = _random_valuation(rng, d)
            F = Box(np.zeros(d), np.ones(d))
            p = rng.uniform(0.05, 2.0, d)
            x = buyer_response(v, p, F)
            Y = rng.uniform(0, 1, size=(100, d))
            assert np.all(v.utility(x, p) >= v.utility(Y, p) - 1e-6)

    def test_strong_concavity_distance(self, rng):
        for _ in range(300):
            d = int(rng.integers(1, 4))
            v = _random_valuation(rng, d)
            F = Box(np.zeros(d), np.ones(d))
            sigma = v.strong_concavity(F)
            p = rng.uniform(0.05, 2.0, d)
            x_star = buyer_response(v, p, F)
            X = rng.uniform(0, 1, size=(50, d))
            lhs = ((X - x_star) ** 2).sum(axis=1)
            rhs = (2 / sigma) * (v.utility(x_star, p) - v.utility(X, p)) + 1e-6
            assert np.all(lhs <= rhs)


class TestQuadratic:
    def test_requires_positive_definite(self):
        with pytest.raises(InvalidArgumentError):
            Quadratic([1, 1], [[1, 2], [2, 1]])

    def test_sigma_is_smallest_eigenvalue(self):
        Q = np.array([[2.0, 0.5], [0.5, 1.0]])
        assert Quadratic([1, 1], Q).strong_concavity(Box([0, 0], [1, 1])) == pytest.approx(
            np.linalg.eigvalsh(Q)[0])

    def test_satiation_flag(self):
        F = Box([0, 0], [1, 1])
        assert Quadratic([0.5, 0.5], np.eye(2)).may_satiate(F)
        assert not Quadratic([3.0, 3.0], np.eye(2)).may_satiate(F)


class TestUnitDemandChoice:
    def test_enumerated(self):
        assert unit_demand_choice(LinearUnitDemand(np.array([5.0, 1.0, 0.0])), [1, -2, 0.5]) == 0

    def test_tie_lowest_index(self):
        assert unit_demand_choice(LinearUnitDemand(np.array([1.0, 1.0, 0.0])), [0, 0, 0]) == 0

    def test_dummy_when_unaffordable(self):
        assert unit_demand_choice(LinearUnitDemand(np.array([0.1, 0.1, 0.0])), [5, 5, 0]) == 2

    def test_dummy_must_be_zero(self):
        with pytest.raises(InvalidArgumentError):
            LinearUnitDemand(np.array([1.0, 1.0]))
        with pytest.raises(InvalidArgumentError):
            LinearUnitDemand(np.array([1.0, 0.0, 0.0]))


class TestRegularizedResponse:
    def test_closed_form(self):
        v = LinearUnitDemand(np.array([1.0, 0.5, 0.0]))
        x = regularized_response(v, [0.0, 0.5, 0.0], 1.0)
        e = np.e
        np.testing.assert_allclose(x, [e / (e + 2), 1 / (e + 2), 1 / (e + 2)])
        np.testing.assert_allclose(x, [0.5761, 0.2119, 0.2119], atol=1e-4)

    def test_grid_maximizer(self):
        # maximize <u, x> + H(x) over a fine grid of the 3-simplex
        u = np.array([1.0, 0.0, 0.0])
        g = np.linspace(0, 1, 801)
        A, B = np.meshgrid(g, g, indexing="ij")
        X = np.stack([A.ravel(), B.ravel(), 1 - A.ravel() - B.ravel()], axis=1)
        X = X[X[:, 2] >= 0]
        best = X[np.argmax(X @ u + entropy(X))]
        np.testing.assert_allclose(regularized_response(u, np.zeros(3), 1.0), best, atol=2e-3)

    def test_uniform_when_indifferent(self):
        np.testing.assert_allclose(regularized_response(np.zeros(3), np.zeros(3), 0.3),
                                   np.full(3, 1 / 3))

    def test_low_temperature_one_hot(self):
        x = regularized_response(np.array([1.0, 0.5, 0.0]), np.zeros(3), 1e-4)
        np.testing.assert_allclose(x, [1, 0, 0], atol=1e-3)

    def test_rejects_nonpositive_eta(self):
        with pytest.raises(InvalidArgumentError):
            regularized_response(np.zeros(3), np.zeros(3), 0.0)

    def test_distribution(self, rng):
        for _ in range(200):
            v = rng.uniform(-3, 3, 4)
            x = regularized_response(v, rng.uniform(0, 3, 4), rng.uniform(0.05, 2))
            assert abs(x.sum() - 1) <= 1e-12
            assert np.all(x > 0)

    def test_entropy_regularized_response_is_softmax(self):
        v = EntropyRegularized(np.array([1.0, 0.5, 0.0]), 0.5)
        p = np.array([0.2, 0.1, 0.0])
        np.testing.assert_allclose(v.response(p, Simplex(3)), regularized_response(v, p, 0.5))


class TestHolder:
    def test_sqrt_values(self, rng):
        for d in (1, 2, 3):
            v = SeparablePower(rng.uniform(0.5, 2.0, d), 0.5)
            lam, beta = v.holder(Box(np.zeros(d), np.ones(d)))
            assert beta == 0.5 and lam == pytest.approx(max(1.0, v.a.sum()))
            X = rng.uniform(0, 1, size=(10_000, d))
            Y = rng.uniform(0, 1, size=(10_000, d))
            lhs = np.abs(v.value(X) - v.value(Y))
            assert np.all(lhs <= v.a.sum() * np.abs(X - Y).sum(axis=1) ** 0.5 + 1e-12)

    def test_entropy(self, rng):
        for n in (2, 3, 5):
            X = rng.dirichlet(np.full(n, 0.5), size=10_000)
            Y = rng.dirichlet(np.full(n, 0.5), size=10_000)
            lhs = np.abs(entropy(X) - entropy(Y))
            assert np.all(lhs <= np.sqrt(n) * np.abs(X - Y).sum(axis=1) ** 0.5 + 1e-12)
