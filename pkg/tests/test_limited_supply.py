import math

import numpy as np
import pytest

from dynpricer import (Box, BuyerDistribution, GumbelPriceDistribution, InvalidArgumentError,
                       MarketInstance, SeparablePower, unit_demand_market)
from dynpricer.limited_supply import (FixedDistribution, FixedPrice, as_policy, concentration_check,
                                      deviation_bound, episode_streams, run_episode,
                                      total_welfare_estimate, verify_limited_supply_theorem)
from dynpricer.market import expected_demand, expected_welfare_price
from dynpricer.unit_demand import distribution_demand_exact
from instances import sqrt_market


def two_sqrt(c=0.5, s=1.0, upper=1.0):
    """Buyers with value a sqrt(x), a in {1, 2}; at p = 1 they buy 0.25 or 1."""
    types = (SeparablePower([1.0], 0.5), SeparablePower([2.0], 0.5))
    return MarketInstance(BuyerDistribution.uniform(types), [c], [s], Box([0], [upper]))


class TestPolicies:
    def test_fixed_price(self):
        P = FixedPrice([0.3, 0.2]).sample(4)
        np.testing.assert_array_equal(P, np.tile([0.3, 0.2], (4, 1)))

    def test_negative_price_rejected(self):
        with pytest.raises(InvalidArgumentError):
            FixedPrice([-0.1])

    def test_as_policy(self):
        D = GumbelPriceDistribution([0.2, 0.1, 0.0], 0.3)
        assert isinstance(as_policy(D), FixedDistribution)
        assert isinstance(as_policy([1.0]), FixedPrice)
        pol = FixedPrice([1.0])
        assert as_policy(pol) is pol


class TestEpisode:
    def test_ample_supply_runs_full_horizon(self, sqrt1):
        tr = run_episode(sqrt1, [1.0], [100.0], 50, 0)
        assert tr.tau == 50 and tr.halted_good is None
        np.testing.assert_allclose(tr.purchases, 0.25)
        assert tr.total_welfare == pytest.approx(50 * 0.25)

    @pytest.mark.parametrize("T", [10, 11, 40])
    def test_halts_after_inventory_runs_out(self, T):
        m = sqrt_market()
        # a price this low makes the buyer take the whole unit every round
        tr = run_episode(m, [0.01], [0.5], T, 0)
        assert tr.tau == T // 2 + 1
        assert tr.halted_good == 0
        np.testing.assert_allclose(tr.purchases, 1.0)

    def test_single_round(self, sqrt1):
        tr = run_episode(sqrt1, [1.0], [0.3], 1, 0)
        assert tr.tau == 1
        assert tr.total_welfare == pytest.approx(0.25)

    def test_halting_invariants(self, rng):
        m = two_sqrt()
        for g in episode_streams(rng, 30):
            tr = run_episode(m, [1.0], [0.5], 200, g)
            assert tr.total_welfare == pytest.approx(tr.welfare.sum())
            assert len(tr.purchases) == len(tr.welfare) == tr.tau
            np.testing.assert_allclose(tr.consumption, np.cumsum(tr.purchases, axis=0))
            assert np.all(tr.consumption[:-1] <= tr.inventory)
            if tr.halted_good is not None:
                assert tr.remaining[tr.halted_good] < 0
                assert tr.remaining[tr.halted_good] >= -1.0
            else:
                assert tr.tau == 200

    def test_welfare_increments(self):
        m = two_sqrt()
        tr = run_episode(m, [1.0], [10.0], 100, 3)
        for x, w in zip(tr.purchases[:, 0], tr.welfare):
            a = 1.0 if x == pytest.approx(0.25) else 2.0
            assert w == pytest.approx(a * math.sqrt(x) - 0.5 * x)

    def test_purchases_clamped_to_one(self):
        m = sqrt_market()
        m = MarketInstance(m.distribution, m.costs, m.supply, Box([0], [2]))
        tr = run_episode(m, [0.1], [5.0], 20, 0)
        assert tr.clamped
        assert np.all(tr.purchases <= 1.0)

    def test_deterministic(self):
        m = two_sqrt()
        a = run_episode(m, [1.0], [0.5], 300, 5)
        b = run_episode(m, [1.0], [0.5], 300, 5)
        assert a.tau == b.tau
        assert a.purchases.tobytes() == b.purchases.tobytes()

    def test_invalid_supply(self, sqrt1):
        with pytest.raises(InvalidArgumentError):
            run_episode(sqrt1, [1.0], [0.0], 10)


class TestWelfareEstimate:
    def test_non_binding_matches_expected(self):
        m = two_sqrt()
        T = 500
        est = total_welfare_estimate(m, [1.0], [5.0], T, 200, 1)
        assert est.mean_tau == T
        assert abs(est.mean - T * expected_welfare_price(m, [1.0])) <= 3 * est.stderr

    def test_single_run_has_no_stderr(self, sqrt1):
        est = total_welfare_estimate(sqrt1, [1.0], [1.0], 10, 1, 0)
        assert math.isnan(est.stderr) and est.runs == 1

    def test_fixed_distribution(self):
        m = unit_demand_market([[1.0, 0.3], [0.4, 0.8]], costs=[0.1, 0.05])
        D = GumbelPriceDistribution([0.2, 0.1, 0.0], 0.3)
        T = 400
        est = total_welfare_estimate(m, D, [1.0, 1.0, 1.0], T, 100, 2)
        _, welfare = distribution_demand_exact(m, D)
        assert abs(est.mean - T * welfare) <= 3 * est.stderr + 1e-9

    def test_streams_are_reproducible(self):
        a = [g.random() for g in episode_streams(11, 3)]
        b = [g.random() for g in episode_streams(11, 3)]
        assert a == b and len(set(a)) == 3


class TestDeviationBound:
    def test_value(self):
        assert deviation_bound(10_000, 1.0) == pytest.approx(5513.6407331255, rel=1e-12)
        assert deviation_bound(10_000, 0.3) == pytest.approx(10066.484678373858, rel=1e-12)

    def test_supply_scaling(self):
        assert deviation_bound(10_000, 0.5) / deviation_bound(10_000, 1.0) == pytest.approx(math.sqrt(2))

    def test_requires_enough_rounds(self):
        with pytest.raises(InvalidArgumentError, match="32 ln T"):
            deviation_bound(10, 0.1)


class TestConcentration:
    def test_unlimited_supply(self):
        rep = concentration_check(two_sqrt(), [1.0], 10_000, 100, 0)
        assert rep.checked == 300
        assert rep.fraction >= 0.99
        assert rep.episode_fraction >= 0.99

    def test_needs_fixed_price(self):
        m = unit_demand_market([[1.0, 0.3]])
        with pytest.raises(InvalidArgumentError):
            concentration_check(m, GumbelPriceDistribution([0.2, 0.1, 0.0], 0.3), 100, 2)


class TestWelfareGuarantee:
    def test_sqrt_market(self, sqrt1):
        rep = verify_limited_supply_theorem(sqrt1, [1.0], [0.3], 10_000, 20, 0)
        assert rep.passed
        assert rep.benchmark == pytest.approx(2500.0)
        assert rep.mean_welfare == pytest.approx(2500.0)
        assert rep.mean_tau == 10_000

    def test_tight_supply(self):
        m = two_sqrt()
        p = [1.0]
        assert expected_demand(m, p)[0] == pytest.approx(0.625)
        rep = verify_limited_supply_theorem(m, p, [0.63], 10_000, 30, 1)
        assert rep.demand_feasible and rep.passed
        assert rep.mean_tau <= 10_000

    def test_non_binding_margin(self):
        m = two_sqrt()
        rep = verify_limited_supply_theorem(m, [1.0], [5.0], 2_000, 100, 2)
        assert rep.mean_tau == 2_000
        assert rep.margin == pytest.approx(rep.bound + 3 * rep.stderr, abs=6 * rep.stderr)

    def test_infeasible_demand_fails(self):
        m = two_sqrt()
        rep = verify_limited_supply_theorem(m, [1.0], [0.5], 10_000, 5, 3)
        assert not rep.demand_feasible and not rep.passed
