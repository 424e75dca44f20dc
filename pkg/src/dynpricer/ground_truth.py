"""Exact oracles used to validate the learners.

Everything here reads the buyer types directly, which a seller never can, so
these functions are for tests and experiment scoring only.

The welfare program with supply ``x_hat`` is solved through its dual: the
dual objective is smooth with gradient ``x_hat - demand(p)`` whenever buyers
are strongly concave, so accelerated projected gradient on the prices
converges fast and the per-type responses at the optimal prices are the
optimal allocations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_random_state, check_scalar, check_vector
from .core_types import MEMBERSHIP_TOL, Box
from .exceptions import InvalidArgumentError, SolverFailureError, StructuralError
from .lp import simplex, vertex_enumeration
from .market import test_only
from .valuations import SeparablePower

SATURATION_TOL = 1e-5
STRUCTURAL_TOL = 1e-5
DUAL_TOL = 1e-10
DUAL_MAX_ITER = 200_000


@dataclass(frozen=True, eq=False)
class ScpSolution:
    """Optimal per-type allocations of the welfare program with supply ``x_hat``."""

    allocations: np.ndarray
    value: float
    dual_prices: np.ndarray
    saturation_residuals: np.ndarray
    iterations: int = 0
    method: str = "dual"


@dataclass(frozen=True, eq=False)
class _DualResult:
    prices: np.ndarray
    allocations: np.ndarray
    demand: np.ndarray
    residual: float
    iterations: int
    converged: bool


def _demand(market, p):
    X = market.type_responses(p)
    return X, market.weights @ X


def _minimize_dual(market, target, floor, tol=DUAL_TOL, max_iter=DUAL_MAX_ITER, start=None):
    """Minimize the supply-constrained dual over ``p >= floor``.

    The gradient is ``target - demand(p)``; its Lipschitz constant is at most
    ``1 / sigma``, which sets the step. Momentum is reset whenever the step
    stops being a descent direction.
    """
    sigma = market.sigma
    if not sigma > 0:
        raise InvalidArgumentError("the dual solver needs strongly concave buyers (sigma > 0)")
    step = sigma
    p = np.maximum(floor + 1.0 if start is None else start, floor)
    y = p.copy()
    t = 1.0
    residual = math.inf
    for it in range(1, max_iter + 1):
        X, dem = _demand(market, y)
        g = target - dem
        residual = float(np.linalg.norm(y - np.maximum(y - g, floor)))
        if residual <= tol:
            return _DualResult(y, X, dem, residual, it, True)
        p_new = np.maximum(y - step * g, floor)
        if g @ (p_new - p) > 0:
            t_new = 1.0
            y = p_new.copy()
        else:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            y = p_new + ((t - 1.0) / t_new) * (p_new - p)
            y = np.maximum(y, floor)
        p, t = p_new, t_new
    X, dem = _demand(market, p)
    return _DualResult(p, X, dem, residual, max_iter, False)


def _check_target(market, x_hat, name="x_hat"):
    x_hat = check_vector(x_hat, name, dim=market.dim)
    if np.any(x_hat <= 0):
        raise InvalidArgumentError(f"{name} must be strictly positive")
    if not market.feasible.contains(x_hat, tol=MEMBERSHIP_TOL):
        raise InvalidArgumentError(f"{name} must lie in the feasible set")
    return x_hat


def _type_values(market, X):
    return np.array([t.value(x) for t, x in zip(market.types, X)])


def grid_eligible(market):
    return (isinstance(market.feasible, Box) and market.dim <= 2 and len(market.types) <= 2
            and all(isinstance(t, SeparablePower) for t in market.types))


@test_only
def solve_scp(market, x_hat, tol=DUAL_TOL, max_iter=DUAL_MAX_ITER):
    """Solve the welfare program whose expected allocation is capped by ``x_hat``."""
    x_hat = _check_target(market, x_hat)
    res = _minimize_dual(market, x_hat, np.zeros(market.dim), tol, max_iter)
    if not res.converged:
        if grid_eligible(market):
            value, X = grid_scp(market, x_hat)
            return ScpSolution(X, value, res.prices, x_hat - market.weights @ X,
                               res.iterations, method="grid")
        raise SolverFailureError("dual descent for the welfare program did not converge",
                                 res.residual)
    value = float(market.weights @ _type_values(market, res.allocations))
    return ScpSolution(res.allocations, value, res.prices, x_hat - res.demand, res.iterations)


@test_only
def val(market, x_hat):
    return solve_scp(market, x_hat).value


@test_only
def sw_of_bundle(market, x_hat):
    """Welfare of the best allocation capped by ``x_hat``, minus its production cost."""
    sol = solve_scp(market, x_hat)
    return sol.value - float(market.costs @ np.asarray(x_hat, dtype=float))


@test_only
def grid_scp(market, x_hat, resolution=1e-3, refinements=3):
    """Primal grid search for the welfare program (monotone values, ``d <= 2``, two types at most).

    With monotone values the last type takes everything left over, so only the
    first type's bundle is gridded. Each refinement zooms in on the best cell.
    """
    if not grid_eligible(market):
        raise InvalidArgumentError("grid search needs <= 2 SeparablePower types on a box with d <= 2")
    x_hat = check_vector(x_hat, "x_hat", dim=market.dim)
    F = market.feasible
    types, w = market.types, market.weights
    if len(types) == 1:
        x = np.minimum(x_hat / w[0], F.upper)
        return float(w[0] * types[0].value(x)), x[None, :]

    lo, hi = F.lower.copy(), np.minimum(F.upper, x_hat / w[0])

    def evaluate(X1):
        X2 = np.minimum((x_hat - w[0] * X1) / w[1], F.upper)
        ok = np.all(X2 >= F.lower - 1e-12, axis=1)
        X2 = np.maximum(X2, F.lower)
        vals = w[0] * types[0].value(X1) + w[1] * types[1].value(X2)
        return np.where(ok, vals, -np.inf), X2

    best_x1, best_val, res = None, -np.inf, resolution
    for _ in range(refinements + 1):
        axes = [np.arange(lo[j], hi[j] + 0.5 * res, res) for j in range(market.dim)]
        axes = [np.clip(a, lo[j], hi[j]) for j, a in enumerate(axes)]
        X1 = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, market.dim)
        vals, _ = evaluate(X1)
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val, best_x1 = float(vals[k]), X1[k]
        lo = np.maximum(F.lower, best_x1 - 2 * res)
        hi = np.minimum(np.minimum(F.upper, x_hat / w[0]), best_x1 + 2 * res)
        res /= 20.0
    if best_x1 is None or not np.isfinite(best_val):
        raise StructuralError("grid search found no feasible allocation")
    _, X2 = evaluate(best_x1[None, :])
    return best_val, np.vstack([best_x1, X2[0]])


@test_only
def check_saturation(sol, x_hat, tol=SATURATION_TOL):
    """True iff the optimal allocation uses the whole supply ``x_hat``."""
    return bool(np.max(np.abs(sol.saturation_residuals)) <= tol)


@dataclass(frozen=True, eq=False)
class LotterySolution:
    value: float
    allocations: np.ndarray
    demand: np.ndarray
    prices: np.ndarray | None = None


def lottery_program(market, supply):
    """LP data ``(c, A_ub, b_ub, A_eq, b_eq)`` for the unit-demand lottery benchmark."""
    V = np.array([t.v for t in market.types])
    n, k = V.shape
    w = market.weights
    c = (w[:, None] * (V - market.costs[None, :])).ravel()
    A_eq = np.kron(np.eye(n), np.ones((1, k)))
    A_ub = np.hstack([w_i * np.eye(k) for w_i in w])
    return c, A_ub, np.asarray(supply, dtype=float), A_eq, np.ones(n)


@test_only
def solve_lottery(market, supply=None, method="simplex"):
    """Optimal lottery: best expected welfare with expected demand capped by ``supply``."""
    s = market.supply if supply is None else check_vector(supply, "supply", dim=market.dim, positive=True)
    if market.unit_demand:
        c, A_ub, b_ub, A_eq, b_eq = lottery_program(market, s)
        solver = {"simplex": simplex, "enumerate": vertex_enumeration}.get(method)
        if solver is None:
            raise InvalidArgumentError(f"unknown LP method {method!r}")
        res = solver(c, A_ub, b_ub, A_eq, b_eq)
        X = res.x.reshape(len(market.types), market.dim)
        return LotterySolution(res.value, X, market.weights @ X)
    # Divisible goods: a deterministic allocation is optimal, so dualize the
    # supply cap with prices p >= c (p - c are the multipliers).
    res = _minimize_dual(market, s, market.costs.copy(), DUAL_TOL, DUAL_MAX_ITER)
    if not res.converged:
        raise SolverFailureError("dual descent for the lottery benchmark did not converge", res.residual)
    X = res.allocations
    value = float(market.weights @ (_type_values(market, X) - X @ market.costs))
    return LotterySolution(value, X, res.demand, res.prices)


@test_only
def opt_lottery(market, supply=None, method="simplex"):
    """Value of the optimal lottery benchmark."""
    return solve_lottery(market, supply, method).value


@test_only
def opt_lottery_ascent(market, supply=None, iterations=2000, floor=1e-6):
    """Cross-check for divisible goods: supergradient ascent of bundle welfare.

    Uses exact dual prices from :func:`solve_scp` as supergradients and
    returns the best welfare seen.
    """
    if market.unit_demand or not isinstance(market.feasible, Box):
        raise InvalidArgumentError("ascent cross-check applies to divisible goods on a box")
    s = market.supply if supply is None else check_vector(supply, "supply", dim=market.dim, positive=True)
    F = market.feasible
    region = Box(np.maximum(F.lower, floor), np.minimum(F.upper, s))
    x = region.center()
    best = -np.inf
    for t in range(1, iterations + 1):
        sol = solve_scp(market, x)
        sw = sol.value - float(market.costs @ x)
        best = max(best, sw)
        g = sol.dual_prices - market.costs
        norm = np.linalg.norm(g)
        if norm == 0:
            break
        x = region.project(x + region.diameter / math.sqrt(t) * g / norm)
    return best


@dataclass(frozen=True)
class Violation:
    check: str
    x: tuple
    y: tuple
    excess: float


@dataclass(eq=False)
class StructuralReport:
    """Counts of each check performed and any violations with their witnesses."""

    trials: int
    counts: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def record(self, check, excess, x, y, tol):
        self.counts[check] = self.counts.get(check, 0) + 1
        if excess > tol:
            self.violations.append(Violation(check, tuple(np.round(x, 12)), tuple(np.round(y, 12)), float(excess)))


def _interior_points(market, k, rng, margin):
    F = market.feasible
    if not isinstance(F, Box):
        raise InvalidArgumentError("structural checks sample from a box feasible set")
    lo = np.maximum(F.lower, 0.0) + margin * (F.upper - F.lower)
    return rng.uniform(lo, F.upper - margin * (F.upper - F.lower), size=(k, F.dim))


@test_only
def structural_checks(market, trials=200, rng=None, tol=STRUCTURAL_TOL, margin=0.02):
    """Randomized checks of concavity, Hölder continuity, the supergradient and saturation."""
    check_scalar(trials, "trials", lower=1, integer=True)
    rng = check_random_state(rng)
    lam, beta = market.holder
    d = market.dim
    c = market.costs
    holder_const = d ** (1.0 - beta) * lam
    report = StructuralReport(trials)
    for _ in range(trials):
        x, y = _interior_points(market, 2, rng, margin)
        sx, sy = solve_scp(market, x), solve_scp(market, y)
        sm = solve_scp(market, 0.5 * (x + y))
        sw_x = sx.value - c @ x
        sw_y = sy.value - c @ y
        sw_m = sm.value - c @ (0.5 * (x + y))
        report.record("concavity", 0.5 * (sw_x + sw_y) - sw_m, x, y, tol)
        report.record("holder", abs(sx.value - sy.value) - holder_const * np.abs(x - y).sum() ** beta,
                      x, y, tol)
        report.record("supergradient", sw_y - sw_x - (sx.dual_prices - c) @ (y - x), x, y, tol)
        report.record("saturation", float(np.max(np.abs(sx.saturation_residuals))), x, x, tol)
    return report
