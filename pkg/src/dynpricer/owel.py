"""Welfare maximization over bundles with learned inducing prices.

Welfare as a function of the induced bundle is concave, and the price that
induces a bundle minus the cost vector is a supergradient. The outer loop is
therefore projected supergradient ascent over a shrunken bundle set, with
:class:`~dynpricer.bun_to_price.BunToPrice` turning every iterate into a
price. The final price is the one inducing the average bundle.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_is_fitted, check_scalar, check_vector
from .bun_to_price import BunToPrice, price_radius
from .core_types import Box, shrunk_set
from .exceptions import InvalidArgumentError
from .sgd import DescentConfig, sgd_perturbed


def welfare_supergradient(p_hat, c):
    """Supergradient ``p_hat - c`` of bundle welfare at the bundle ``p_hat`` induces."""
    p_hat = check_vector(p_hat, "p_hat")
    c = check_vector(c, "c", dim=p_hat.shape[0])
    return p_hat - c


def default_xi(alpha, lam, beta, d, c):
    """Shrink amount ``(alpha / (4 lam d^beta + sqrt(d) ||c||))^(1/beta)``."""
    check_scalar(alpha, "alpha", lower=0.0, lower_inclusive=False)
    c = np.asarray(c, dtype=float)
    return (alpha / (4.0 * lam * d ** beta + math.sqrt(d) * np.linalg.norm(c))) ** (1.0 / beta)


def shrink_loss_bound(alpha, lam, beta, d, c, xi=None):
    """Welfare lost by optimizing over the shrunken set: ``lam (d xi)^beta + sqrt(d) xi ||c||``.

    ``xi`` defaults to :func:`default_xi`, in which case the bound is at most ``alpha / 4``.
    """
    if xi is None:
        xi = default_xi(alpha, lam, beta, d, c)
    check_scalar(xi, "xi", lower=0.0)
    c = np.asarray(c, dtype=float)
    return lam * (d * xi) ** beta + math.sqrt(d) * xi * float(np.linalg.norm(c))


@dataclass(frozen=True)
class OwelConfig:
    """Hyperparameters of the outer loop; ``None`` entries take theory defaults.

    ``scale`` multiplies the theory iteration count. The ``inner_*`` fields are
    the per-call budget of the bundle-to-price learner.
    """

    alpha: float = 0.05
    delta: float = 0.1
    epsilon: float | None = None
    xi: float | None = None
    iterations: int | None = None
    step: float | None = None
    scale: float = 1e-3
    inner_iterations: int = 2000
    inner_validation: int = 2000
    inner_restarts: int | None = None
    inner_step: float | None = None
    inner_radius: float | None = None

    def to_params(self):
        return asdict(self)


@dataclass(frozen=True)
class ResolvedOwel:
    """Concrete outer-loop parameters for one market."""

    alpha: float
    delta: float
    inner_delta: float
    xi: float
    epsilon: float
    iterations: int
    step: float
    radius: float
    grad_bound: float
    diameter: float
    shrink_loss: float
    domain: object = field(repr=False)


def resolve_owel(market, supply, alpha, delta, *, xi=None, epsilon=None, iterations=None,
                 step=None, scale=1e-3, inner_radius=None, epsilon_rule=None, require_margin=True):
    """Fill in theory defaults for ``xi``, ``epsilon``, ``T`` and the step.

    ``T = ceil(scale (4 D G / alpha)^2)`` with ``D`` the diameter of the shrunken
    set and ``G = radius + ||c||`` the supergradient bound. The inner accuracy
    is ``min(xi/2, alpha / (8 radius sqrt(T)))`` so the perturbation term of the
    ascent stays below ``alpha / 4``; radius and ``T`` are evaluated once at
    ``epsilon = xi/2``.
    """
    check_scalar(alpha, "alpha", lower=0.0, lower_inclusive=False)
    check_scalar(delta, "delta", lower=0.0, upper=1.0, lower_inclusive=False, upper_inclusive=False)
    d = market.dim
    s = check_vector(supply, "supply", dim=d, positive=True)
    lam, beta = market.holder
    sigma = market.sigma
    c = market.costs
    if xi is None:
        xi = default_xi(alpha, lam, beta, d, c)
    domain = shrunk_set(market.feasible, s, xi)

    if epsilon is None and epsilon_rule is not None:
        epsilon = epsilon_rule(alpha)
    eps0 = xi / 2.0 if epsilon is None else epsilon
    radius = inner_radius if inner_radius is not None else price_radius(d, lam, beta, sigma, eps0)
    G = radius + float(np.linalg.norm(c))
    D = domain.diameter
    if iterations is None:
        iterations = max(1, math.ceil(scale * (4.0 * D * G / alpha) ** 2))
    if epsilon is None:
        epsilon = min(xi / 2.0, alpha / (8.0 * radius * math.sqrt(iterations)))
    if require_margin and not xi > epsilon:
        raise InvalidArgumentError(
            f"shrink xi={xi:.4g} must exceed the inner accuracy epsilon={epsilon:.4g} "
            "so that supply stays feasible"
        )
    if step is None:
        step = D / (G * math.sqrt(iterations))
    return ResolvedOwel(
        alpha=float(alpha),
        delta=float(delta),
        inner_delta=delta / (iterations + 1),
        xi=float(xi),
        epsilon=float(epsilon),
        iterations=int(iterations),
        step=float(step),
        radius=float(radius),
        grad_bound=G,
        diameter=D,
        shrink_loss=shrink_loss_bound(alpha, lam, beta, d, c, xi),
        domain=domain,
    )


@dataclass(frozen=True, eq=False)
class OwelTrace:
    """Outer iterates ``x_t``, their learned prices ``p_t`` and cumulative queries."""

    bundles: np.ndarray
    prices: np.ndarray
    queries: np.ndarray
    inner_converged: np.ndarray
    average_bundle: np.ndarray
    final_price: np.ndarray
    final_queries: int

    def __len__(self):
        return self.bundles.shape[0]


class OWel(BaseEstimator):
    """Learn a welfare-maximizing price vector from revealed preferences.

    Parameters mirror :class:`OwelConfig`. ``fit(oracle, supply=None)`` uses
    the market's supply when ``supply`` is omitted.

    Attributes
    ----------
    price_ : ndarray
        Final posted price.
    trace_ : OwelTrace
        Per-iteration bundles, prices and query counts.
    params_ : ResolvedOwel
        Parameters actually used.
    n_queries_ : int
    """

    def __init__(self, alpha=0.05, delta=0.1, epsilon=None, xi=None, iterations=None,
                 step=None, scale=1e-3, inner_iterations=2000, inner_validation=2000,
                 inner_restarts=None, inner_step=None, inner_radius=None):
        self.alpha = alpha
        self.delta = delta
        self.epsilon = epsilon
        self.xi = xi
        self.iterations = iterations
        self.step = step
        self.scale = scale
        self.inner_iterations = inner_iterations
        self.inner_validation = inner_validation
        self.inner_restarts = inner_restarts
        self.inner_step = inner_step
        self.inner_radius = inner_radius

    # hooks overridden by the unit-demand variant
    _require_margin = True

    def _epsilon_rule(self):
        return None

    def _learning_oracle(self, oracle):
        return oracle

    def _check_market(self, market):
        if market.unit_demand:
            raise InvalidArgumentError("use OWelUD for unit-demand markets")
        if not isinstance(market.feasible, Box):
            raise InvalidArgumentError("the outer loop supports box feasible sets only")

    def resolve(self, market, supply=None):
        supply = market.supply if supply is None else supply
        return resolve_owel(
            market, supply, self.alpha, self.delta, xi=self.xi, epsilon=self.epsilon,
            iterations=self.iterations, step=self.step, scale=self.scale,
            inner_radius=self.inner_radius, epsilon_rule=self._epsilon_rule(),
            require_margin=self._require_margin,
        )

    def _inner(self, params):
        return BunToPrice(
            epsilon=params.epsilon, delta=params.inner_delta, restarts=self.inner_restarts,
            iterations=self.inner_iterations, validation_samples=self.inner_validation,
            step=self.inner_step, radius=params.radius,
        )

    def fit(self, oracle, supply=None):
        self._check_market(oracle.market)
        oracle = self._learning_oracle(oracle)
        market = oracle.market
        params = self.resolve(market, supply)
        inner = self._inner(params)
        c = market.costs
        start_queries = oracle.query_count
        bundles, prices, queries, converged = [], [], [], []

        def supergradient(x):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                inner.fit(oracle, x)
            bundles.append(x.copy())
            prices.append(inner.price_)
            queries.append(oracle.query_count - start_queries)
            converged.append(inner.converged_)
            return welfare_supergradient(inner.price_, c)

        cfg = DescentConfig(
            iterations=params.iterations,
            domain=params.domain,
            start=params.domain.center(),
            diameter=params.diameter,
            grad_bound=params.grad_bound,
            step=params.step,
            perturb_bound=params.epsilon,
        )
        x_bar = sgd_perturbed(supergradient, None, cfg, maximize=True)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            inner.fit(oracle, x_bar)

        self.params_ = params
        self.price_ = self._finalize_price(inner.price_)
        self.average_bundle_ = x_bar
        self.n_queries_ = oracle.query_count - start_queries
        self.trace_ = OwelTrace(
            bundles=np.array(bundles),
            prices=np.array(prices),
            queries=np.array(queries, dtype=np.int64),
            inner_converged=np.array(converged + [inner.converged_]),
            average_bundle=x_bar,
            final_price=self.price_,
            final_queries=self.n_queries_,
        )
        return self

    def _finalize_price(self, p):
        return p

    def score(self, market):
        """Exact expected welfare of the learned price (test oracle)."""
        from .market import expected_welfare_price

        check_is_fitted(self, "price_")
        return expected_welfare_price(market, self.price_)


def owel(oracle, alpha, delta, supply=None, cfg=None):
    """Functional form of :class:`OWel`; returns ``(price, trace)``."""
    params = (cfg or OwelConfig()).to_params()
    params.update(alpha=alpha, delta=delta)
    est = OWel(**params).fit(oracle, supply)
    return est.price_, est.trace_
