"""Randomized pricing for unit-demand buyers.

A unit-demand buyer facing prices shifted down by ``eta`` times independent
Gumbel noise picks item ``j`` with probability ``softmax((v - p) / eta)_j``.
Such a buyer therefore acts, in expectation, like a buyer with the
entropy-regularized valuation ``<v, x> + eta H(x)``, which is strongly concave
and can be priced with the divisible-goods machinery. The price vectors
actually posted are shifted and clamped by :func:`convert` so they are
nonnegative with a zero-priced dummy good, without changing any buyer's choice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_is_fitted, check_points, check_random_state, check_scalar, check_vector
from .exceptions import InvalidArgumentError
from .owel import OWel, OwelConfig
from .market import distribution_demand_welfare, test_only


def convert(p_tilde):
    """Shift so the dummy good costs 0, then lift so no price is negative.

    Accepts one vector or a batch of rows; the dummy good is the last entry.
    """
    arr = np.asarray(p_tilde, dtype=float)
    P = np.atleast_2d(arr)
    if P.shape[1] < 2:
        raise InvalidArgumentError("need at least one real good and the dummy good")
    shifted = P - P[:, -1:]
    lift = np.minimum(0.0, shifted[:, :-1].min(axis=1))
    out = shifted - lift[:, None]
    out[:, -1] = 0.0
    return out[0] if arr.ndim == 1 else out


def _check_base(p):
    p = check_vector(p, "p")
    if p.shape[0] < 2 or p[-1] != 0.0:
        raise InvalidArgumentError("price vector must end with the dummy good priced 0")
    return p


def sample_perturbed_price(p, eta, rng=None, size=None):
    """Draw ``convert(p - eta * Gumbel)``; ``size`` draws give an array of rows."""
    p = _check_base(p)
    check_scalar(eta, "eta", lower=0.0, lower_inclusive=False)
    rng = check_random_state(rng)
    shape = p.shape if size is None else (size, p.shape[0])
    return convert(p - eta * rng.gumbel(size=shape))


@dataclass(frozen=True, eq=False)
class GumbelPriceDistribution:
    """Law of ``convert(base - eta * Gumbel)``.

    ``base`` is only defined up to a common shift, normalized here so the
    dummy entry is 0; real-good entries may be negative, since the posted
    prices always pass through :func:`convert`.
    """

    base: np.ndarray
    eta: float

    def __post_init__(self):
        object.__setattr__(self, "base", _check_base(self.base))
        check_scalar(self.eta, "eta", lower=0.0, lower_inclusive=False)

    @property
    def dim(self):
        return self.base.shape[0]

    def sample(self, size=None, rng=None):
        return sample_perturbed_price(self.base, self.eta, rng, size)

    def choice_probabilities(self, v):
        """Exact probability that a buyer with values ``v`` picks each item."""
        v = check_vector(v, "v", dim=self.dim)
        z = (v - self.base) / self.eta
        e = np.exp(z - z.max())
        return e / e.sum()


def sim(oracle, p, eta, rng=None):
    """One simulated purchase of a regularized buyer at ``p``.

    Posts a freshly perturbed price to the revealed-preference oracle. The
    expected one-hot answer is the softmax mixture demand at ``p``.
    """
    rng = oracle.rng if rng is None else rng
    return oracle.query(sample_perturbed_price(p, eta, rng))


class RegularizedResponseOracle:
    """Serve queries of the imagined regularized buyers through a real oracle.

    Each query at price ``p`` becomes one real query at a perturbed price, so
    the answer is an unbiased sample of the regularized demand at ``p``.
    Prices need not price the dummy good at 0: the softmax is shift invariant,
    so ``p`` is re-based on its last entry before perturbing.
    """

    def __init__(self, oracle, eta):
        if not oracle.market.unit_demand:
            raise InvalidArgumentError("the regularized oracle wraps a unit-demand market")
        check_scalar(eta, "eta", lower=0.0, lower_inclusive=False)
        self.base = oracle
        self.eta = float(eta)
        self.market = oracle.market.regularized(eta)

    @property
    def dim(self):
        return self.base.dim

    @property
    def feasible(self):
        return self.base.feasible

    @property
    def rng(self):
        return self.base.rng

    @property
    def query_count(self):
        return self.base.query_count

    def query_batch(self, prices):
        P = check_points(prices, "prices", dim=self.dim)
        with self.base._lock:
            noise = self.base.rng.gumbel(size=P.shape)
        return self.base.query_batch(convert(P - self.eta * noise))

    def query(self, prices):
        return self.query_batch(check_vector(prices, "prices", dim=self.dim)[None, :])[0]


def regularization_parameters(alpha, d):
    """Inner accuracy ``alpha / 2`` and temperature ``alpha / (2 ln(d + 1))`` for ``d`` real goods."""
    check_scalar(alpha, "alpha", lower=0.0, lower_inclusive=False)
    check_scalar(d, "d", lower=1, integer=True)
    return alpha / 2.0, alpha / (2.0 * math.log(d + 1))


class OWelUD(OWel):
    """Welfare-maximizing randomized prices for unit-demand buyers.

    Runs the outer welfare loop over the shrunken simplex against the
    regularized buyers, whose purchases are simulated by posting perturbed
    prices. Parameters are those of :class:`~dynpricer.owel.OWel`; ``epsilon``
    and the temperature default to ``alpha / 2`` and ``alpha / (2 ln(d + 1))``.

    Attributes
    ----------
    distribution_ : GumbelPriceDistribution
        The learned price law.
    eta_ : float
        Temperature used.
    """

    _require_margin = False

    def __init__(self, alpha=0.2, delta=0.1, epsilon=None, xi=0.03, iterations=40,
                 step=0.1, scale=1e-3, inner_iterations=1500, inner_validation=1000,
                 inner_restarts=None, inner_step=None, inner_radius=None, eta=None):
        super().__init__(alpha=alpha, delta=delta, epsilon=epsilon, xi=xi, iterations=iterations,
                         step=step, scale=scale, inner_iterations=inner_iterations,
                         inner_validation=inner_validation, inner_restarts=inner_restarts,
                         inner_step=inner_step, inner_radius=inner_radius)
        self.eta = eta

    def _epsilon_rule(self):
        return lambda alpha: alpha / 2.0

    def _check_market(self, market):
        if not market.unit_demand:
            raise InvalidArgumentError("OWelUD needs a unit-demand market")

    def temperature(self, market):
        if self.eta is not None:
            return float(self.eta)
        return regularization_parameters(self.alpha, market.dim - 1)[1]

    def _learning_oracle(self, oracle):
        return RegularizedResponseOracle(oracle, self.temperature(oracle.market))

    def resolve(self, market, supply=None):
        if market.unit_demand:
            market = market.regularized(self.temperature(market))
        return super().resolve(market, supply)

    def fit(self, oracle, supply=None):
        if supply is not None:
            supply = check_vector(supply, "supply", dim=oracle.dim, positive=True)
            if supply[-1] != 1.0:
                raise InvalidArgumentError("the dummy good must have supply 1")
        super().fit(oracle, supply)
        self.eta_ = self.temperature(oracle.market)
        self.distribution_ = GumbelPriceDistribution(self.price_ - self.price_[-1], self.eta_)
        self.base_market_ = oracle.market
        return self

    def score(self, market=None, samples=100_000, rng=0):
        """Monte-Carlo welfare of the learned price law (test oracle)."""
        check_is_fitted(self, "distribution_")
        market = self.base_market_ if market is None else market
        return distribution_demand_welfare(market, self.distribution_, samples, rng).welfare


def owel_ud(oracle, alpha, delta, supply=None, cfg=None):
    """Functional form of :class:`OWelUD`; returns the learned price law."""
    params = {} if cfg is None else cfg.to_params()
    params.update(alpha=alpha, delta=delta)
    return OWelUD(**params).fit(oracle, supply).distribution_


@test_only
def distribution_demand_exact(market, distribution):
    """Exact expected demand and welfare under a Gumbel price law.

    Each type picks item ``j`` with probability ``softmax((v - base) / eta)_j``.
    """
    V = np.array([t.v for t in market.types])
    probs = np.array([distribution.choice_probabilities(v) for v in V])
    demand = market.weights @ probs
    welfare = float(market.weights @ ((V - market.costs[None, :]) * probs).sum(axis=1))
    return demand, welfare


@test_only
def regularized_scp_saturation_check(market, x_hat, eta, tol=1e-6):
    """Check that the regularized welfare program uses all of ``x_hat``.

    Coordinates where ``x_hat`` is zero carry no allocation, so the program is
    solved on the support of ``x_hat``.
    """
    from .core_types import Simplex
    from .ground_truth import solve_scp
    from .market import BuyerDistribution, MarketInstance
    from .valuations import EntropyRegularized

    x_hat = check_vector(x_hat, "x_hat", dim=market.dim, nonnegative=True)
    if abs(x_hat.sum() - 1.0) > 1e-9:
        raise InvalidArgumentError("x_hat must lie in the simplex")
    support = np.flatnonzero(x_hat > 0)
    if support.size == 1:
        return True  # every allocation in the face is the single vertex
    types = tuple(EntropyRegularized(t.v[support], eta) for t in market.types)
    restricted = MarketInstance(BuyerDistribution(types, market.weights),
                                market.costs[support], np.ones(support.size), Simplex(support.size))
    sol = solve_scp(restricted, x_hat[support])
    return bool(np.max(np.abs(sol.saturation_residuals)) <= tol)


__all__ = [
    "GumbelPriceDistribution",
    "OWelUD",
    "OwelConfig",
    "RegularizedResponseOracle",
    "convert",
    "distribution_demand_exact",
    "owel_ud",
    "regularization_parameters",
    "regularized_scp_saturation_check",
    "sample_perturbed_price",
    "sim",
]
