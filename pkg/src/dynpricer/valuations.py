"""Buyer valuation families and best responses to posted prices.

Every valuation exposes ``value``, ``gradient`` and ``response``. ``response``
is vectorized over a batch of price vectors so simulators can answer many
queries in one call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_points, check_scalar, check_vector
from .core_types import Box, Simplex
from .exceptions import InvalidArgumentError, SingularGradientError, SolverFailureError

KKT_TOL = 1e-7
MAX_ASCENT_ITER = 100_000


def entropy(x):
    """Shannon entropy (natural log) with ``0 ln(1/0) = 0``; rows if 2-d."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(x > 0, -x * np.log(np.where(x > 0, x, 1.0)), 0.0)
    return terms.sum(axis=-1)


def softmax(u, axis=-1):
    u = np.asarray(u, dtype=float)
    z = u - u.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


class Valuation:
    """Common interface; subclasses are frozen dataclasses."""

    #: unit-demand valuations answer with a single item instead of a bundle
    unit_demand = False

    @property
    def dim(self):
        raise NotImplementedError

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def strong_concavity(self, feasible):
        """Modulus ``sigma`` of strong concavity over ``feasible``."""
        raise NotImplementedError

    def holder(self, feasible):
        """Constants ``(lam, beta)`` with ``|v(x)-v(y)| <= lam ||x-y||_1^beta``."""
        raise NotImplementedError

    def smoothness(self, feasible):
        """Lipschitz constant of the gradient over ``feasible`` (may be inf)."""
        return math.inf

    def utility(self, x, prices):
        x = np.asarray(x, dtype=float)
        return self.value(x) - (x * np.asarray(prices, dtype=float)).sum(axis=-1)

    def response(self, prices, feasible):
        """Utility-maximizing bundle for each row of ``prices``."""
        P = check_points(prices, "prices", dim=self.dim)
        out = np.array([_projected_ascent(self, p, feasible) for p in P])
        return out[0] if np.ndim(prices) == 1 else out


def _projected_ascent(val, p, feasible, x0=None):
    """Maximize ``val(x) - <p, x>`` over ``feasible`` by projected gradient ascent.

    Step ``1/L`` from the smoothness estimate when finite, otherwise
    backtracking. Stops once the projected-gradient residual is below
    ``KKT_TOL``.
    """
    x = feasible.project(feasible.center() if x0 is None else x0)
    L = val.smoothness(feasible)
    step = 1.0 / L if np.isfinite(L) and L > 0 else 1.0
    residual = np.inf
    for _ in range(MAX_ASCENT_ITER):
        g = val.gradient(x) - p
        residual = float(np.linalg.norm(x - feasible.project(x + g)))
        if residual <= KKT_TOL:
            return x
        if np.isfinite(L):
            x = feasible.project(x + step * g)
            continue
        u0 = float(val.utility(x, p))
        t = step
        while True:
            cand = feasible.project(x + t * g)
            d = cand - x
            if val.utility(cand, p) >= u0 + g @ d - (0.5 / t) * (d @ d) or t < 1e-12:
                break
            t *= 0.5
        x = cand
        step = min(2.0 * t, 1e6)
    raise SolverFailureError("projected ascent did not converge", residual)


@dataclass(frozen=True, eq=False)
class SeparablePower(Valuation):
    """``v(x) = sum_j a_j x_j**exponent`` with ``0 < exponent < 1``."""

    a: np.ndarray
    exponent: float

    def __post_init__(self):
        object.__setattr__(self, "a", check_vector(self.a, "a", positive=True))
        check_scalar(self.exponent, "exponent", lower=0.0, upper=1.0,
                     lower_inclusive=False, upper_inclusive=False)

    @property
    def dim(self):
        return self.a.shape[0]

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise InvalidArgumentError("SeparablePower is defined on nonnegative bundles")
        return (self.a * x ** self.exponent).sum(axis=-1)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise SingularGradientError("SeparablePower gradient is unbounded at zero")
        return self.a * self.exponent * x ** (self.exponent - 1.0)

    def strong_concavity(self, feasible):
        # |v''| is smallest at the upper corner of the box.
        upper = _upper_corner(feasible, self.dim)
        e = self.exponent
        return float(np.min(self.a * e * (1.0 - e) * upper ** (e - 2.0)))

    def holder(self, feasible):
        # |x^e - y^e| <= |x - y|^e, so lam = sum(a) works; floored at 1.
        return max(1.0, float(self.a.sum())), float(self.exponent)

    def response(self, prices, feasible):
        if not isinstance(feasible, Box):
            return super().response(prices, feasible)
        P = check_points(prices, "prices", dim=self.dim)
        e = self.exponent
        with np.errstate(divide="ignore"):
            unconstrained = (self.a * e / P) ** (1.0 / (1.0 - e))
        out = np.clip(unconstrained, feasible.lower, feasible.upper)
        return out[0] if np.ndim(prices) == 1 else out


@dataclass(frozen=True, eq=False)
class Quadratic(Valuation):
    """``v(x) = <a, x> - x^T Q x / 2`` with ``Q`` symmetric positive definite."""

    a: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        a = check_vector(self.a, "a")
        Q = np.asarray(self.Q, dtype=float)
        if Q.shape != (a.shape[0], a.shape[0]):
            raise InvalidArgumentError(f"Q must have shape {(a.shape[0],) * 2}")
        if not np.allclose(Q, Q.T, atol=1e-12):
            raise InvalidArgumentError("Q must be symmetric")
        eig = np.linalg.eigvalsh(Q)
        if eig[0] <= 0:
            raise InvalidArgumentError("Q must be positive definite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "_eig", eig)

    @property
    def dim(self):
        return self.a.shape[0]

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.a - 0.5 * np.einsum("...i,ij,...j->...", x, self.Q, x)

    def gradient(self, x):
        return self.a - np.asarray(x, dtype=float) @ self.Q

    def strong_concavity(self, feasible):
        return float(self._eig[0])

    def smoothness(self, feasible):
        return float(self._eig[-1])

    def holder(self, feasible):
        upper = np.maximum(np.abs(_lower_corner(feasible, self.dim)),
                           np.abs(_upper_corner(feasible, self.dim)))
        lam = float(np.max(np.abs(self.a) + np.abs(self.Q) @ upper))
        return max(1.0, lam), 1.0

    def may_satiate(self, feasible):
        """True if the marginal value of some good turns negative inside ``feasible``."""
        lo, hi = _lower_corner(feasible, self.dim), _upper_corner(feasible, self.dim)
        worst = self.a - np.maximum(self.Q * lo[None, :], self.Q * hi[None, :]).sum(axis=1)
        return bool(np.any(worst < 0))


@dataclass(frozen=True, eq=False)
class LinearUnitDemand(Valuation):
    """Unit-demand values ``v`` over ``d`` goods plus a trailing dummy good valued 0."""

    v: np.ndarray
    unit_demand = True

    def __post_init__(self):
        v = check_vector(self.v, "v")
        if v.shape[0] < 2:
            raise InvalidArgumentError("need at least one real good and the dummy good")
        if v[-1] != 0.0:
            raise InvalidArgumentError("the dummy good (last entry) must have value 0")
        if np.any(v[:-1] <= 0):
            raise InvalidArgumentError("values of real goods must be strictly positive")
        object.__setattr__(self, "v", v)

    @property
    def dim(self):
        return self.v.shape[0]

    def value(self, x):
        return np.asarray(x, dtype=float) @ self.v

    def gradient(self, x):
        return np.broadcast_to(self.v, np.shape(x)).copy()

    def strong_concavity(self, feasible):
        return 0.0

    def holder(self, feasible):
        return max(1.0, float(self.v.max())), 1.0

    def choice(self, prices):
        """Index of the chosen item for each row of ``prices`` (lowest index on ties)."""
        P = check_points(prices, "prices", dim=self.dim)
        idx = np.argmax(self.v[None, :] - P, axis=1)
        return int(idx[0]) if np.ndim(prices) == 1 else idx

    def response(self, prices, feasible=None):
        idx = np.atleast_1d(self.choice(prices))
        out = np.zeros((idx.shape[0], self.dim))
        out[np.arange(idx.shape[0]), idx] = 1.0
        return out[0] if np.ndim(prices) == 1 else out


@dataclass(frozen=True, eq=False)
class EntropyRegularized(Valuation):
    """``v(x) = <v, x> + eta * H(x)`` on the simplex: the regularized unit-demand buyer."""

    v: np.ndarray
    eta: float

    def __post_init__(self):
        object.__setattr__(self, "v", check_vector(self.v, "v"))
        check_scalar(self.eta, "eta", lower=0.0, lower_inclusive=False)

    @property
    def dim(self):
        return self.v.shape[0]

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.v + self.eta * entropy(x)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise SingularGradientError("entropy gradient is unbounded on the simplex boundary")
        return self.v - self.eta * (np.log(x) + 1.0)

    def strong_concavity(self, feasible):
        return float(self.eta)

    def holder(self, feasible):
        vmax = float(np.max(np.abs(self.v)))
        return math.sqrt(self.dim) + vmax, 0.5

    def response(self, prices, feasible=None):
        P = check_points(prices, "prices", dim=self.dim)
        out = softmax((self.v[None, :] - P) / self.eta, axis=1)
        return out[0] if np.ndim(prices) == 1 else out


def _upper_corner(feasible, dim):
    if isinstance(feasible, Box):
        return feasible.upper
    return np.ones(dim)


def _lower_corner(feasible, dim):
    if isinstance(feasible, Box):
        return feasible.lower
    return np.zeros(dim)


def value(v, x):
    return float(v.value(check_vector(x, "x", dim=v.dim)))


def gradient(v, x):
    return v.gradient(check_vector(x, "x", dim=v.dim))


def buyer_response(v, p, feasible):
    """Utility-maximizing bundle ``argmax_{x in F} v(x) - <x, p>``."""
    p = check_vector(p, "p", dim=v.dim, nonnegative=True)
    return v.response(p, feasible)


def unit_demand_choice(v, p):
    """Chosen item (0-based index; the last index is the dummy good)."""
    if not isinstance(v, LinearUnitDemand):
        raise InvalidArgumentError("unit_demand_choice needs a LinearUnitDemand valuation")
    p = check_vector(p, "p", dim=v.dim)
    return v.choice(p)


def regularized_response(v, p, eta):
    """Softmax response of the entropy-regularized buyer with temperature ``eta``."""
    check_scalar(eta, "eta", lower=0.0, lower_inclusive=False)
    values = v.v if isinstance(v, (LinearUnitDemand, EntropyRegularized)) else check_vector(v, "v")
    p = check_vector(p, "p", dim=values.shape[0])
    return softmax((values - p) / eta)
