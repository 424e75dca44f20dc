import math
import warnings

import numpy as np
import pytest
from sklearn.base import clone

from dynpricer import (BtpBudget, BunToPrice, BuyerDistribution, MarketInstance, NotFittedError,
                       NotInducibleError, PriceBall, RevealedPreferenceOracle, SeparablePower, Box,
                       bun_to_price, dual_gradient_estimate, price_radius)
from dynpricer.bun_to_price import restarts_for
from dynpricer.ground_truth import val
from dynpricer.market import expected_demand


def dual_value(market, p, target):
    X = market.type_responses(p)
    vals = np.array([t.value(x) for t, x in zip(market.types, X)])
    return float(market.weights @ (vals - X @ p) + p @ target)


class TestPriceRadius:
    def test_linear_exponent(self):
        assert price_radius(1, 2.0, 1.0, 0.3, 0.1) == pytest.approx(2.0)

    def test_one_good(self):
        assert price_radius(1, 1.0, 0.5, 1.0, 1.0) == pytest.approx(4.0)

    def test_four_goods(self):
        assert price_radius(4, 1.0, 0.5, 1.0, 1.0) == pytest.approx(32.0)

    @pytest.mark.parametrize("args", [(1, 0.5, 0.5, 1, 1), (1, 1, 1.5, 1, 1), (1, 1, 0.5, 0, 1),
                                      (1, 1, 0.5, 1, 0), (0, 1, 0.5, 1, 1)])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            price_radius(*args)


class TestBudget:
    def test_restarts(self):
        assert restarts_for(0.1) == 5
        assert restarts_for(0.5) == 2

    def test_total_queries(self):
        assert BtpBudget(3, 100, 40).total_queries == 420

    def test_theory_schedule(self):
        b = BtpBudget.theory(1, 1.0, 0.5, 0.25, 0.05, 0.1, 1.0, scale=1e-6)
        L = price_radius(1, 1.0, 0.5, 0.25, 0.05)
        assert b.restarts == 5
        assert b.iterations == math.ceil(1e-6 * 16384 * L ** 2 / (0.05 ** 4 * 0.25 ** 2))
        assert b.step == pytest.approx(1.0 / (L * math.sqrt(b.iterations)))

    def test_t1_constant_configurable(self):
        a = BtpBudget.theory(1, 1.0, 0.5, 0.25, 0.05, 0.1, 1.0, scale=1e-6)
        b = BtpBudget.theory(1, 1.0, 0.5, 0.25, 0.05, 0.1, 1.0, scale=1e-6, t1_constant=4096)
        assert b.iterations < a.iterations


class TestDualGradient:
    def test_vanishes_at_inducing_price(self, sqrt1):
        bought = RevealedPreferenceOracle(sqrt1, 0).query([1.0])
        np.testing.assert_allclose(dual_gradient_estimate([0.25], bought), [0.0])

    def test_equal_bundles(self):
        np.testing.assert_array_equal(dual_gradient_estimate([0.3, 0.4], [0.3, 0.4]), [0, 0])

    def test_unbiased(self, two_type):
        target = np.array([0.4, 0.3])
        p = np.array([0.8, 1.1])
        bought = RevealedPreferenceOracle(two_type, 5).query_batch(np.tile(p, (100_000, 1)))
        est = dual_gradient_estimate(target, bought).mean(axis=0)
        np.testing.assert_allclose(est, target - expected_demand(two_type, p), atol=0.01)


class TestBunToPrice:
    def test_sqrt_market(self, sqrt1):
        est = BunToPrice(epsilon=0.05, delta=0.1).fit(RevealedPreferenceOracle(sqrt1, 11), [0.25])
        assert abs(est.price_[0] - 1.0) <= 0.2
        assert -est.score(sqrt1) <= 0.05

    def test_closed_form_inverse(self):
        a = np.array([1.0, 0.6])
        m = MarketInstance(BuyerDistribution.uniform((SeparablePower(a, 0.5),)), [0, 0], [1, 1],
                           Box([0, 0], [1, 1]))
        target = np.array([0.3, 0.5])
        exact = a / (2 * np.sqrt(target))
        np.testing.assert_allclose(expected_demand(m, exact), target)
        est = BunToPrice(epsilon=0.05).fit(RevealedPreferenceOracle(m, 3), target)
        assert np.linalg.norm(expected_demand(m, est.price_) - target) <= 0.05
        np.testing.assert_allclose(est.price_, exact, atol=0.1)

    def test_zero_coordinate_not_inducible(self, two_type):
        with pytest.raises(NotInducibleError):
            BunToPrice().fit(RevealedPreferenceOracle(two_type, 0), [0.0, 0.5])

    def test_outside_feasible_not_inducible(self, two_type):
        with pytest.raises(NotInducibleError):
            BunToPrice().fit(RevealedPreferenceOracle(two_type, 0), [1.5, 0.5])

    def test_selection_and_accounting(self, two_type):
        oracle = RevealedPreferenceOracle(two_type, 8)
        oracle.query([1.0, 1.0])  # earlier traffic is not charged to the fit
        est = BunToPrice(epsilon=0.05, iterations=400, validation_samples=300).fit(oracle, [0.4, 0.3])
        b = est.budget_
        assert est.n_queries_ == b.restarts * b.iterations + b.restarts * b.validation_samples
        assert est.candidates_.shape == (b.restarts, 2)
        dist = np.linalg.norm(est.validation_bundles_ - est.target_, axis=1)
        np.testing.assert_array_equal(dist, est.validation_distances_)
        assert est.best_index_ == int(np.argmin(dist))
        np.testing.assert_array_equal(est.price_, est.candidates_[est.best_index_])
        assert PriceBall(est.radius_, 2).contains(est.candidates_, tol=0.0)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_distance_from_dual_gap(self, two_type):
        target = np.array([0.35, 0.3])
        sigma = two_type.sigma
        best = val(two_type, target)
        checked = 0
        for seed in range(4):
            est = BunToPrice(epsilon=0.05, iterations=300, validation_samples=50).fit(
                RevealedPreferenceOracle(two_type, seed), target)
            for p in est.candidates_:
                gap = max(dual_value(two_type, p, target) - best, 0.0)
                dist = np.linalg.norm(expected_demand(two_type, p) - target)
                assert dist <= 2 * math.sqrt(gap / sigma) + 1e-6
                checked += 1
        assert checked == 20

    def test_budget_exhausted_warns(self, two_type):
        with pytest.warns(RuntimeWarning, match="budget exhausted"):
            est = BunToPrice(epsilon=0.01, iterations=2, validation_samples=5, restarts=1).fit(
                RevealedPreferenceOracle(two_type, 0), [0.4, 0.3])
        assert not est.converged_
        assert est.price_.shape == (2,)

    def test_deterministic(self, two_type):
        a = BunToPrice(iterations=300, validation_samples=100).fit(RevealedPreferenceOracle(two_type, 4), [0.4, 0.3])
        b = BunToPrice(iterations=300, validation_samples=100).fit(RevealedPreferenceOracle(two_type, 4), [0.4, 0.3])
        assert a.candidates_.tobytes() == b.candidates_.tobytes()

    def test_estimator_api(self, sqrt1):
        est = BunToPrice(epsilon=0.1, iterations=50)
        assert est.get_params()["iterations"] == 50
        clone(est).set_params(delta=0.2)
        with pytest.raises(NotFittedError):
            est.score(sqrt1)

    def test_functional_form(self, sqrt1):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            est = bun_to_price(RevealedPreferenceOracle(sqrt1, 2), [0.25], 0.05, 0.1,
                               budget=BtpBudget(2, 500, 200))
        assert est.budget_.restarts == 2 and est.n_queries_ == 1400
