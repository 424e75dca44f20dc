"""Buyer population, the revealed-preference oracle and exact demand oracles.

Learning code only ever talks to :class:`RevealedPreferenceOracle`, which
returns purchased bundles. The exact functions at the bottom of this module
(``expected_demand`` and friends) compute quantities the seller cannot observe;
they carry a ``__test_only__`` marker and exist for validation.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_points, check_random_state, check_scalar, check_vector
from .core_types import Box, Simplex
from .exceptions import InvalidArgumentError
from .valuations import EntropyRegularized, LinearUnitDemand, Quadratic


def test_only(func):
    """Mark ``func`` as a ground-truth oracle that learners must not consume."""
    func.__test_only__ = True
    return func


@dataclass(frozen=True, eq=False)
class BuyerDistribution:
    """Finite mixture of buyer types."""

    types: tuple
    weights: np.ndarray

    def __post_init__(self):
        types = tuple(self.types)
        if not types:
            raise InvalidArgumentError("a buyer distribution needs at least one type")
        w = check_vector(self.weights, "weights", dim=len(types), positive=True)
        if abs(w.sum() - 1.0) > 1e-12:
            raise InvalidArgumentError(f"weights must sum to 1, got {w.sum()!r}")
        dims = {t.dim for t in types}
        if len(dims) != 1:
            raise InvalidArgumentError("all buyer types must share one dimension")
        if len({t.unit_demand for t in types}) != 1:
            raise InvalidArgumentError("cannot mix unit-demand and divisible buyer types")
        object.__setattr__(self, "types", types)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, types):
        types = tuple(types)
        return cls(types, np.full(len(types), 1.0 / len(types)))

    @property
    def dim(self):
        return self.types[0].dim

    @property
    def unit_demand(self):
        return self.types[0].unit_demand

    def __len__(self):
        return len(self.types)

    def sample(self, rng, size):
        return rng.choice(len(self.types), size=size, p=self.weights)


@dataclass(frozen=True, eq=False)
class MarketInstance:
    """Buyer distribution plus the seller's costs, supply and feasible bundles.

    In unit-demand mode every vector has ``d + 1`` entries, the last one being
    the dummy "buy nothing" good with zero cost and unit supply.
    """

    distribution: BuyerDistribution
    costs: np.ndarray
    supply: np.ndarray
    feasible: object
    vmax: float | None = None
    saturating: bool = field(init=False, default=True)

    def __post_init__(self):
        d = self.distribution.dim
        costs = check_vector(self.costs, "costs", dim=d, nonnegative=True)
        supply = check_vector(self.supply, "supply", dim=d, positive=True)
        if self.feasible.dim != d:
            raise InvalidArgumentError("feasible set dimension does not match buyer types")
        if self.unit_demand:
            if not isinstance(self.feasible, Simplex):
                raise InvalidArgumentError("unit-demand markets live on the simplex")
            if costs[-1] != 0.0:
                raise InvalidArgumentError("the dummy good must have zero cost")
            if supply[-1] != 1.0:
                raise InvalidArgumentError("the dummy good must have supply 1")
            top = max(float(t.v.max()) for t in self.distribution.types)
            vmax = top if self.vmax is None else float(self.vmax)
            if top > vmax:
                raise InvalidArgumentError(f"values exceed vmax={vmax}")
            object.__setattr__(self, "vmax", vmax)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "supply", supply)
        object.__setattr__(
            self, "saturating",
            not any(isinstance(t, Quadratic) and t.may_satiate(self.feasible)
                    for t in self.distribution.types),
        )

    @property
    def dim(self):
        return self.distribution.dim

    @property
    def unit_demand(self):
        return self.distribution.unit_demand

    @property
    def types(self):
        return self.distribution.types

    @property
    def weights(self):
        return self.distribution.weights

    @property
    def norm_bound(self):
        return self.feasible.norm_bound

    @property
    def sigma(self):
        return min(t.strong_concavity(self.feasible) for t in self.types)

    @property
    def holder(self):
        pairs = [t.holder(self.feasible) for t in self.types]
        return max(p[0] for p in pairs), min(p[1] for p in pairs)

    def type_responses(self, prices):
        """Response of every type to one price vector, shape ``(n_types, d)``."""
        p = check_vector(prices, "prices", dim=self.dim)
        return np.array([t.response(p, self.feasible) for t in self.types])

    def regularized(self, eta):
        """The imagined market whose buyers maximize ``<v, x> + eta H(x)``."""
        if not self.unit_demand:
            raise InvalidArgumentError("only unit-demand markets can be regularized")
        types = tuple(EntropyRegularized(t.v, eta) for t in self.types)
        return MarketInstance(BuyerDistribution(types, self.weights), self.costs,
                              self.supply, self.feasible, vmax=self.vmax)


def unit_demand_market(values, weights=None, costs=None, supply=None, vmax=None):
    """Build a unit-demand market from ``(n, d)`` values over the real goods."""
    V = np.atleast_2d(np.asarray(values, dtype=float))
    n, d = V.shape
    types = tuple(LinearUnitDemand(np.append(row, 0.0)) for row in V)
    w = np.full(n, 1.0 / n) if weights is None else weights
    c = np.zeros(d) if costs is None else check_vector(costs, "costs", dim=d)
    s = np.ones(d) if supply is None else check_vector(supply, "supply", dim=d)
    return MarketInstance(BuyerDistribution(types, w), np.append(c, 0.0),
                          np.append(s, 1.0), Simplex(d + 1), vmax=vmax)


@dataclass
class OracleStats:
    query_count: int = 0
    seed: int | None = None


class RevealedPreferenceOracle:
    """Posts prices to freshly drawn buyers and reports only what they buy.

    Randomness comes from a counter-based Philox stream seeded once, so a
    given seed always reproduces the same sequence of buyers. The query
    counter is guarded by a lock so concurrent callers are counted exactly.
    """

    def __init__(self, market, seed=None):
        self.market = market
        self.stats = OracleStats(seed=seed if not isinstance(seed, np.random.Generator) else None)
        self._rng = check_random_state(seed)
        self._lock = threading.Lock()

    @property
    def dim(self):
        return self.market.dim

    @property
    def feasible(self):
        return self.market.feasible

    @property
    def rng(self):
        return self._rng

    @property
    def query_count(self):
        return self.stats.query_count

    def query_batch(self, prices):
        """Answer one query per row of ``prices``; returns purchases ``(k, d)``."""
        P = check_points(prices, "prices", dim=self.dim)
        if np.any(P < 0):
            raise InvalidArgumentError("posted prices must be nonnegative")
        with self._lock:
            idx = self.market.distribution.sample(self._rng, P.shape[0])
            self.stats.query_count += P.shape[0]
        out = np.empty_like(P)
        for i, t in enumerate(self.market.types):
            rows = idx == i
            if np.any(rows):
                out[rows] = t.response(P[rows], self.market.feasible)
        return out

    def query(self, prices):
        return self.query_batch(check_vector(prices, "prices", dim=self.dim)[None, :])[0]


def rep_query(oracle, p):
    """One revealed-preference query: the bundle bought by a random buyer at ``p``."""
    return oracle.query(p)


@test_only
def expected_demand(market, p):
    """Exact expected bundle bought at prices ``p``."""
    p = check_vector(p, "p", dim=market.dim, nonnegative=not market.unit_demand)
    return market.weights @ market.type_responses(p)


@test_only
def expected_welfare_price(market, p):
    """Exact expected welfare ``E[v(x) - <c, x>]`` at prices ``p``."""
    p = check_vector(p, "p", dim=market.dim, nonnegative=not market.unit_demand)
    X = market.type_responses(p)
    vals = np.array([t.value(x) for t, x in zip(market.types, X)])
    return float(market.weights @ (vals - X @ market.costs))


@dataclass(frozen=True)
class DistributionEstimate:
    demand: np.ndarray
    welfare: float
    demand_stderr: np.ndarray
    welfare_stderr: float
    samples: int


@test_only
def distribution_demand_welfare(market, distribution, samples, rng=None, batch=200_000):
    """Monte-Carlo estimate of demand and welfare under a random price law.

    Prices are sampled from ``distribution``; each draw is scored with the
    exact per-type responses, so the only noise is from the price draws.
    """
    check_scalar(samples, "samples", lower=1, integer=True)
    rng = check_random_state(rng)
    V = np.array([t.v for t in market.types]) if market.unit_demand else None
    d = market.dim
    sum_x = np.zeros(d)
    sum_xx = np.zeros(d)
    sum_w = sum_ww = 0.0
    done = 0
    while done < samples:
        k = min(batch, samples - done)
        P = distribution.sample(k, rng)
        if V is not None:
            choice = np.argmax(V[None, :, :] - P[:, None, :], axis=2)  # (k, n)
            X = np.zeros((k, d))
            W = np.zeros(k)
            for i, wt in enumerate(market.weights):
                np.add.at(X, (np.arange(k), choice[:, i]), wt)
                W += wt * (V[i] - market.costs)[choice[:, i]]
        else:
            X = np.array([expected_demand(market, p) for p in P])
            W = np.array([expected_welfare_price(market, p) for p in P])
        sum_x += X.sum(axis=0)
        sum_xx += (X ** 2).sum(axis=0)
        sum_w += W.sum()
        sum_ww += (W ** 2).sum()
        done += k
    mean_x = sum_x / samples
    mean_w = sum_w / samples
    if samples > 1:
        var_x = np.maximum(sum_xx / samples - mean_x ** 2, 0.0) * samples / (samples - 1)
        var_w = max(sum_ww / samples - mean_w ** 2, 0.0) * samples / (samples - 1)
        se_x, se_w = np.sqrt(var_x / samples), float(np.sqrt(var_w / samples))
    else:
        se_x, se_w = np.full(d, np.nan), float("nan")
    return DistributionEstimate(mean_x, float(mean_w), se_x, se_w, int(samples))
