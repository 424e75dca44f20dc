"""Finite-horizon selling with non-replenishable inventory.

The seller starts with ``T * s_j`` units of good ``j`` and posts prices from a
fixed policy for ``T`` rounds. The episode stops at the first round after
which some good's remaining inventory is negative. Per-round welfare is
computed from the simulated buyer's type, which the simulator knows; it is an
evaluation metric and is never fed back to a learner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_random_state, check_scalar, check_vector
from .exceptions import InvalidArgumentError
from .market import expected_demand, expected_welfare_price, test_only
from .unit_demand import GumbelPriceDistribution

CONCENTRATION_POINTS = (0.25, 0.5, 1.0)


@dataclass(frozen=True, eq=False)
class FixedPrice:
    """Post the same price vector every round."""

    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", check_vector(self.p, "p", nonnegative=True))

    def sample(self, size, rng=None):
        return np.broadcast_to(self.p, (size, self.p.shape[0])).copy()


@dataclass(frozen=True, eq=False)
class FixedDistribution:
    """Post an independent draw from a Gumbel price law every round."""

    distribution: GumbelPriceDistribution

    def sample(self, size, rng=None):
        return self.distribution.sample(size, rng)


def as_policy(policy):
    if isinstance(policy, (FixedPrice, FixedDistribution)):
        return policy
    if isinstance(policy, GumbelPriceDistribution):
        return FixedDistribution(policy)
    return FixedPrice(policy)


@dataclass(frozen=True, eq=False)
class EpisodeTrace:
    """One episode up to its stopping round ``tau`` (1-based).

    ``consumption[t-1]`` is the cumulative purchase after round ``t`` and
    ``welfare[t-1]`` that round's welfare increment.
    """

    tau: int
    horizon: int
    total_welfare: float
    consumption: np.ndarray
    purchases: np.ndarray
    welfare: np.ndarray
    inventory: np.ndarray
    halted_good: int | None
    clamped: bool

    @property
    def remaining(self):
        return self.inventory - self.consumption[-1]


def _simulate(market, policy, T, rng):
    """Purchases ``(T, d)`` and welfare increments ``(T,)`` of ``T`` independent rounds."""
    P = policy.sample(T, rng)
    idx = market.distribution.sample(rng, T)
    X = np.empty((T, market.dim))
    W = np.empty(T)
    for i, t in enumerate(market.types):
        rows = idx == i
        if np.any(rows):
            X[rows] = t.response(P[rows], market.feasible)
            W[rows] = t.value(X[rows]) - X[rows] @ market.costs
    clamped = bool(np.any(X > 1.0))
    X = np.minimum(X, 1.0)
    return X, W, clamped


def run_episode(market, policy, supply, T, rng=None):
    """Simulate one episode with inventory ``T * supply``."""
    check_scalar(T, "T", lower=1, integer=True)
    s = check_vector(supply, "supply", dim=market.dim, positive=True)
    rng = check_random_state(rng)
    X, W, clamped = _simulate(market, as_policy(policy), T, rng)
    inventory = T * s
    y = np.cumsum(X, axis=0)
    over = y > inventory
    halted_good = None
    tau = T
    if np.any(over):
        first = np.where(over.any(axis=0), over.argmax(axis=0), T)
        j = int(np.argmin(first))
        if first[j] < T:
            tau = int(first[j]) + 1
            halted_good = j
    return EpisodeTrace(
        tau=tau,
        horizon=T,
        total_welfare=float(W[:tau].sum()),
        consumption=y[:tau],
        purchases=X[:tau],
        welfare=W[:tau],
        inventory=inventory,
        halted_good=halted_good,
        clamped=clamped,
    )


def episode_streams(rng, runs):
    """Independent generators, one per episode, spawned from ``rng``."""
    return check_random_state(rng).spawn(runs)


@dataclass(frozen=True)
class WelfareEstimate:
    mean: float
    stderr: float
    mean_tau: float
    runs: int


def total_welfare_estimate(market, policy, supply, T, runs, rng=None):
    """Monte-Carlo mean and standard error of total welfare over independent episodes.

    ``stderr`` is NaN when ``runs == 1``.
    """
    check_scalar(runs, "runs", lower=1, integer=True)
    traces = [run_episode(market, policy, supply, T, g) for g in episode_streams(rng, runs)]
    Z = np.array([tr.total_welfare for tr in traces])
    taus = np.array([tr.tau for tr in traces])
    stderr = float(Z.std(ddof=1) / math.sqrt(runs)) if runs > 1 else float("nan")
    return WelfareEstimate(float(Z.mean()), stderr, float(taus.mean()), runs)


def deviation_bound(T, s_min):
    """Welfare lost to early stopping: ``(1 + 2 c0) sqrt(T ln T / s_min)``, ``c0 = sqrt(8 ln T)``.

    Valid when ``T * s_min > 32 ln T``.
    """
    check_scalar(T, "T", lower=2, integer=True)
    check_scalar(s_min, "s_min", lower=0.0, lower_inclusive=False)
    if not T * s_min > 32.0 * math.log(T):
        raise InvalidArgumentError(
            f"deviation bound needs T * s_min > 32 ln T (got {T * s_min:.4g} <= {32 * math.log(T):.4g})"
        )
    c0 = math.sqrt(8.0 * math.log(T))
    return (1.0 + 2.0 * c0) * math.sqrt(T * math.log(T) / s_min)


@dataclass(frozen=True)
class ConcentrationReport:
    checked: int
    held: int
    episodes: int
    episodes_all_held: int

    @property
    def fraction(self):
        return self.held / self.checked

    @property
    def episode_fraction(self):
        return self.episodes_all_held / self.episodes


@test_only
def concentration_check(market, p, T, episodes, rng=None, points=CONCENTRATION_POINTS):
    """Check ``|y_{j,t} - t x_j| <= c0 sqrt(t x_j)`` at a few rounds of unlimited-supply episodes."""
    check_scalar(episodes, "episodes", lower=1, integer=True)
    policy = as_policy(p)
    x = (expected_demand(market, policy.p) if isinstance(policy, FixedPrice)
         else None)
    if x is None:
        raise InvalidArgumentError("concentration check uses a fixed price")
    c0 = math.sqrt(8.0 * math.log(T))
    rounds = sorted({max(1, int(round(f * T))) for f in points})
    checked = held = all_held = 0
    for g in episode_streams(rng, episodes):
        X, _, _ = _simulate(market, policy, T, g)
        y = np.cumsum(X, axis=0)
        ok = np.array([np.abs(y[t - 1] - t * x) <= c0 * np.sqrt(t * x) for t in rounds])
        checked += ok.size
        held += int(ok.sum())
        all_held += int(ok.all())
    return ConcentrationReport(checked, held, episodes, all_held)


@dataclass(frozen=True)
class LimitedSupplyReport:
    mean_welfare: float
    stderr: float
    mean_tau: float
    benchmark: float
    bound: float
    threshold: float
    margin: float
    demand_feasible: bool

    @property
    def passed(self):
        return self.demand_feasible and self.margin >= 0


@test_only
def verify_limited_supply_theorem(market, p, supply, T, runs, rng=None):
    """Compare mean episode welfare with ``T SW(p)`` minus the deviation bound."""
    s = check_vector(supply, "supply", dim=market.dim, positive=True)
    p = check_vector(p, "p", dim=market.dim, nonnegative=True)
    feasible = bool(np.all(expected_demand(market, p) <= s + 1e-12))
    bound = deviation_bound(T, float(s.min()))
    est = total_welfare_estimate(market, FixedPrice(p), s, T, runs, rng)
    benchmark = T * expected_welfare_price(market, p)
    se = est.stderr if np.isfinite(est.stderr) else 0.0
    threshold = benchmark - bound - 3.0 * se
    return LimitedSupplyReport(est.mean, est.stderr, est.mean_tau, benchmark, bound,
                               threshold, est.mean - threshold, feasible)
