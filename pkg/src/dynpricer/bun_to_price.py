"""Learn prices that induce a target expected bundle.

The inducing price is the minimizer of the Lagrangian dual of the welfare
program with supply equal to the target, and the purchase of a single random
buyer gives an unbiased dual gradient. We run several independent projected
descents over a bounded price ball, post each averaged price a few thousand
more times, and keep the one whose empirical demand is closest to the target.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_is_fitted, check_scalar, check_vector
from .core_types import MEMBERSHIP_TOL, PriceBall
from .exceptions import InvalidArgumentError, NotInducibleError
from .sgd import DescentConfig, sgd_unbiased

#: constant in front of the theory schedule for the descent length
THEORY_T1_CONSTANT = 16384.0


def price_radius(d, lam, beta, sigma, epsilon):
    """Radius ``sqrt(d) lam^(1/beta) (4d / (eps^2 sigma))^((1-beta)/beta)`` of the price ball."""
    check_scalar(d, "d", lower=1, integer=True)
    check_scalar(lam, "lam", lower=1.0)
    check_scalar(beta, "beta", lower=0.0, upper=1.0, lower_inclusive=False)
    check_scalar(sigma, "sigma", lower=0.0, lower_inclusive=False)
    check_scalar(epsilon, "epsilon", lower=0.0, lower_inclusive=False)
    return (math.sqrt(d) * lam ** (1.0 / beta)
            * (4.0 * d / (epsilon ** 2 * sigma)) ** ((1.0 - beta) / beta))


def restarts_for(delta):
    """Number of independent descents, ``ceil(log2(2/delta))``."""
    check_scalar(delta, "delta", lower=0.0, upper=1.0, lower_inclusive=False, upper_inclusive=False)
    return max(1, math.ceil(math.log2(2.0 / delta)))


@dataclass(frozen=True)
class BtpBudget:
    """Query budget: ``restarts`` descents of ``iterations`` steps, ``validation_samples`` each."""

    restarts: int
    iterations: int
    validation_samples: int
    step: float | None = None

    def __post_init__(self):
        check_scalar(self.restarts, "restarts", lower=1, integer=True)
        check_scalar(self.iterations, "iterations", lower=1, integer=True)
        check_scalar(self.validation_samples, "validation_samples", lower=1, integer=True)
        if self.step is not None:
            check_scalar(self.step, "step", lower=0.0, lower_inclusive=False)

    @property
    def total_queries(self):
        return self.restarts * (self.iterations + self.validation_samples)

    @classmethod
    def theory(cls, d, lam, beta, sigma, epsilon, delta, norm_bound, scale=1e-3,
               t1_constant=THEORY_T1_CONSTANT):
        """Schedule from the convergence analysis, multiplied by ``scale``."""
        L = price_radius(d, lam, beta, sigma, epsilon) / math.sqrt(d)
        R = norm_bound
        t1 = t1_constant * d * L ** 2 * R ** 2 / (epsilon ** 4 * sigma ** 2)
        t2 = 4.0 * R ** 2 * math.log(16.0 * d * R ** 2 / delta) / epsilon ** 2
        iterations = max(1, math.ceil(scale * t1))
        return cls(
            restarts=restarts_for(delta),
            iterations=iterations,
            validation_samples=max(1, math.ceil(scale * t2)),
            step=R / (L * math.sqrt(d * iterations)),
        )


def dual_gradient_estimate(target, purchased):
    """Unbiased estimate ``target - purchased`` of the dual gradient at the posted price."""
    target = np.asarray(target, dtype=float)
    purchased = np.asarray(purchased, dtype=float)
    if target.shape[-1] != purchased.shape[-1]:
        raise InvalidArgumentError("target and purchased bundles differ in dimension")
    return target - purchased


def check_inducible(target, feasible):
    target = check_vector(target, "target", dim=feasible.dim)
    if np.any(target <= 0):
        bad = int(np.flatnonzero(target <= 0)[0])
        raise NotInducibleError(
            f"target coordinate {bad} is {target[bad]:.3g}; only strictly positive "
            "bundles can be induced with bounded prices"
        )
    if not feasible.contains(target, tol=MEMBERSHIP_TOL):
        raise NotInducibleError("target bundle lies outside the feasible set")
    return target


class BunToPrice(BaseEstimator):
    """Bundle-to-price learner.

    Parameters
    ----------
    epsilon : float
        Target accuracy ``||x(p) - target||_2``.
    delta : float
        Failure probability; sets the number of restarts when ``restarts`` is None.
    restarts, iterations, validation_samples : int
        Query budget. ``iterations`` is the length of each descent run.
    step : float or None
        Descent step. ``None`` uses the strong-concavity modulus ``sigma``, the
        inverse of the smoothness of the dual objective.
    radius : float or None
        Price-ball radius; ``None`` uses :func:`price_radius`.

    Attributes
    ----------
    price_ : ndarray
        Selected price vector.
    candidates_ : ndarray of shape (restarts, d)
        Averaged price of every descent run.
    validation_bundles_ : ndarray of shape (restarts, d)
        Empirical mean purchase at each candidate.
    n_queries_ : int
        Revealed-preference queries spent by this fit.
    converged_ : bool
        False when the best empirical distance exceeds ``epsilon / 2``.
    """

    def __init__(self, epsilon=0.05, delta=0.1, restarts=None, iterations=2000,
                 validation_samples=2000, step=None, radius=None):
        self.epsilon = epsilon
        self.delta = delta
        self.restarts = restarts
        self.iterations = iterations
        self.validation_samples = validation_samples
        self.step = step
        self.radius = radius

    def budget(self):
        restarts = restarts_for(self.delta) if self.restarts is None else self.restarts
        return BtpBudget(restarts, self.iterations, self.validation_samples, self.step)

    def fit(self, oracle, target, start=None):
        check_scalar(self.epsilon, "epsilon", lower=0.0, lower_inclusive=False)
        market = oracle.market
        target = check_inducible(target, market.feasible)
        budget = self.budget()
        d = market.dim
        sigma = market.sigma
        lam, beta = market.holder
        radius = self.radius
        if radius is None:
            radius = price_radius(d, lam, beta, sigma, self.epsilon)
        ball = PriceBall(radius, d)
        step = budget.step if budget.step is not None else sigma
        queries_before = oracle.query_count

        first = np.ones(d) if start is None else check_vector(start, "start", dim=d)
        cfg = DescentConfig(
            iterations=budget.iterations,
            domain=ball,
            start=np.tile(ball.project(first), (budget.restarts, 1)),
            diameter=radius,
            grad_bound=math.sqrt(2.0) * market.norm_bound,
            step=step,
        )
        candidates = sgd_unbiased(
            lambda P: dual_gradient_estimate(target, oracle.query_batch(P)), cfg
        )

        posted = np.repeat(candidates, budget.validation_samples, axis=0)
        bought = oracle.query_batch(posted)
        means = bought.reshape(budget.restarts, budget.validation_samples, d).mean(axis=1)
        distances = np.linalg.norm(means - target, axis=1)
        best = int(np.argmin(distances))

        self.target_ = target
        self.radius_ = radius
        self.step_ = step
        self.budget_ = budget
        self.candidates_ = candidates
        self.validation_bundles_ = means
        self.validation_distances_ = distances
        self.best_index_ = best
        self.price_ = candidates[best].copy()
        self.n_queries_ = oracle.query_count - queries_before
        self.converged_ = bool(distances[best] <= self.epsilon / 2.0)
        if not self.converged_:
            warnings.warn(
                f"budget exhausted: best empirical distance {distances[best]:.4g} "
                f"exceeds epsilon/2 = {self.epsilon / 2:.4g}; returning best candidate",
                RuntimeWarning,
                stacklevel=2,
            )
        return self

    def score(self, market):
        """Negative exact distance between induced and target bundle (test oracle)."""
        from .market import expected_demand

        check_is_fitted(self, "price_")
        return -float(np.linalg.norm(expected_demand(market, self.price_) - self.target_))


def bun_to_price(oracle, target, epsilon, delta, budget=None, **kwargs):
    """Functional form of :class:`BunToPrice`; returns the fitted estimator."""
    if budget is not None:
        kwargs.update(restarts=budget.restarts, iterations=budget.iterations,
                      validation_samples=budget.validation_samples, step=budget.step)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return BunToPrice(epsilon=epsilon, delta=delta, **kwargs).fit(oracle, target)
