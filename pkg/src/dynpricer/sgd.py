"""Projected subgradient descent with noisy gradients or perturbed iterates.

Both engines return the uniform average of all ``T`` iterates. ``start`` may
be a single point or a ``(k, d)`` batch, in which case ``k`` independent runs
advance in lockstep (the callbacks then receive and return batches).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_scalar
from .exceptions import BoundViolationError, InvalidArgumentError

_NORM_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class DescentConfig:
    """Iteration count, step and the bounds the convergence guarantees rely on.

    ``domain`` is anything with a ``project`` method (a feasible set or a
    :class:`~dynpricer.core_types.PriceBall`). When ``step`` is omitted it
    defaults to ``diameter / (grad_bound * sqrt(iterations))``.
    """

    iterations: int
    domain: object
    start: np.ndarray
    diameter: float
    grad_bound: float
    step: float | None = None
    perturb_bound: float = 0.0

    def __post_init__(self):
        check_scalar(self.iterations, "iterations", lower=1, integer=True)
        check_scalar(self.diameter, "diameter", lower=0.0, lower_inclusive=False)
        check_scalar(self.grad_bound, "grad_bound", lower=0.0, lower_inclusive=False)
        check_scalar(self.perturb_bound, "perturb_bound", lower=0.0)
        step = self.step
        if step is None:
            step = self.diameter / (self.grad_bound * math.sqrt(self.iterations))
        check_scalar(step, "step", lower=0.0, lower_inclusive=False)
        object.__setattr__(self, "step", float(step))
        start = np.asarray(self.start, dtype=float)
        if not self.domain.contains(start):
            raise InvalidArgumentError("start point must lie in the descent domain")
        object.__setattr__(self, "start", start)

    @property
    def unbiased_bound(self):
        """Expected suboptimality bound ``2 D G / sqrt(T)`` for unbiased gradients."""
        return 2.0 * self.diameter * self.grad_bound / math.sqrt(self.iterations)

    @property
    def perturbed_bound(self):
        """Suboptimality bound ``D G / sqrt(T) + G E sqrt(T)`` for perturbed iterates."""
        T = self.iterations
        return (self.diameter * self.grad_bound / math.sqrt(T)
                + self.grad_bound * self.perturb_bound * math.sqrt(T))


@dataclass(frozen=True, eq=False)
class DescentResult:
    average: np.ndarray
    iterates: np.ndarray | None = None


def _check_norm(vec, bound, what):
    norms = np.linalg.norm(np.atleast_2d(vec), axis=1)
    worst = float(norms.max())
    if worst > bound * (1.0 + _NORM_SLACK) + _NORM_SLACK:
        raise BoundViolationError(f"{what} norm {worst:.6g} exceeds declared bound {bound:.6g}")


def sgd_unbiased(grad_estimator, cfg, rng=None, *, maximize=False, return_iterates=False):
    """Projected descent driven by unbiased subgradient estimates.

    ``grad_estimator(x)`` (or ``grad_estimator(x, rng)`` when ``rng`` is given)
    must return estimates with norm at most ``cfg.grad_bound``; a larger one
    aborts with :class:`BoundViolationError`.
    """
    sign = -1.0 if maximize else 1.0
    x = cfg.start.copy()
    total = np.zeros_like(x)
    history = [] if return_iterates else None
    for _ in range(cfg.iterations):
        total += x
        if history is not None:
            history.append(x.copy())
        g = grad_estimator(x) if rng is None else grad_estimator(x, rng)
        g = np.asarray(g, dtype=float)
        _check_norm(g, cfg.grad_bound, "gradient estimate")
        x = cfg.domain.project(x - sign * cfg.step * g)
    avg = total / cfg.iterations
    if return_iterates:
        return DescentResult(avg, np.array(history))
    return avg


def sgd_perturbed(subgradient, perturb, cfg, *, maximize=False, return_iterates=False):
    """Projected descent whose projected iterates are shifted by ``perturb(x)``.

    ``perturb`` may be ``None`` for the noiseless method. Perturbation norms
    above ``cfg.perturb_bound`` abort, as do perturbed points leaving the
    domain.
    """
    sign = -1.0 if maximize else 1.0
    x = cfg.start.copy()
    total = np.zeros_like(x)
    history = [] if return_iterates else None
    for _ in range(cfg.iterations):
        total += x
        if history is not None:
            history.append(x.copy())
        g = np.asarray(subgradient(x), dtype=float)
        _check_norm(g, cfg.grad_bound, "subgradient")
        x = cfg.domain.project(x - sign * cfg.step * g)
        if perturb is not None:
            xi = np.asarray(perturb(x), dtype=float)
            _check_norm(xi, cfg.perturb_bound, "perturbation")
            x = x + xi
            if not cfg.domain.contains(x):
                raise BoundViolationError("perturbed iterate left the domain")
    avg = total / cfg.iterations
    if return_iterates:
        return DescentResult(avg, np.array(history))
    return avg
