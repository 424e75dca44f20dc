"""Feasible bundle sets, Euclidean projections and the shrunken set.

Prices and bundles are plain ``numpy`` float arrays. Every projection accepts
either a single point of shape ``(d,)`` or a batch of shape ``(k, d)`` and
returns the same shape, so parallel descent runs can share one call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_scalar, check_vector
from .exceptions import InfeasibleShrinkError, InvalidArgumentError

MEMBERSHIP_TOL = 1e-9


def _as_batch(y, dim):
    arr = np.asarray(y, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise InvalidArgumentError(
            f"point has dimension {arr.shape[-1]}, feasible set has dimension {dim}"
        )
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("cannot project a non-finite point")
    return arr, single


def project_simplex_rows(Y, total=1.0):
    """Sort-and-threshold projection of each row of ``Y`` onto the scaled simplex."""
    n_features = Y.shape[1]
    U = np.sort(Y, axis=1)[:, ::-1]
    cssv = np.cumsum(U, axis=1) - total
    ind = np.arange(1, n_features + 1)
    cond = U - cssv / ind > 0
    rho = np.count_nonzero(cond, axis=1)
    theta = cssv[np.arange(len(Y)), rho - 1] / rho
    return np.maximum(Y - theta[:, None], 0.0)


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box ``{x : lower <= x <= upper}``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = check_vector(self.lower, "lower")
        upper = check_vector(self.upper, "upper", dim=lower.shape[0])
        bad = np.flatnonzero(lower >= upper)
        if bad.size:
            raise InvalidArgumentError(
                f"Box requires lower < upper coordinatewise (coordinate {bad[0]})"
            )
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self):
        return self.lower.shape[0]

    @property
    def norm_bound(self):
        return float(np.linalg.norm(np.maximum(np.abs(self.lower), np.abs(self.upper))))

    @property
    def diameter(self):
        return float(np.linalg.norm(self.upper - self.lower))

    def project(self, y):
        arr, single = _as_batch(y, self.dim)
        out = np.clip(arr, self.lower, self.upper)
        return out[0] if single else out

    def contains(self, x, tol=MEMBERSHIP_TOL):
        arr, _ = _as_batch(x, self.dim)
        return bool(np.all(arr >= self.lower - tol) and np.all(arr <= self.upper + tol))

    def center(self):
        return 0.5 * (self.lower + self.upper)

    def __repr__(self):
        return f"Box(lower={self.lower.tolist()}, upper={self.upper.tolist()})"


@dataclass(frozen=True, eq=False)
class Simplex:
    """Probability simplex over ``dim`` items."""

    dim: int

    def __post_init__(self):
        check_scalar(self.dim, "dim", lower=1, integer=True)

    @property
    def norm_bound(self):
        return 1.0

    @property
    def diameter(self):
        return float(np.sqrt(2.0))

    def project(self, y):
        arr, single = _as_batch(y, self.dim)
        out = project_simplex_rows(arr)
        return out[0] if single else out

    def contains(self, x, tol=MEMBERSHIP_TOL):
        arr, _ = _as_batch(x, self.dim)
        return bool(np.all(arr >= -tol) and np.all(np.abs(arr.sum(axis=1) - 1.0) <= tol))

    def center(self):
        return np.full(self.dim, 1.0 / self.dim)

    def __repr__(self):
        return f"Simplex({self.dim})"


@dataclass(frozen=True, eq=False)
class CappedSimplex:
    """Simplex intersected with a box: ``{x in simplex : lower <= x <= upper}``.

    This is the shrunken set used for unit-demand buyers, where the outer
    iterates must stay strictly inside the simplex and below the supply caps.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = check_vector(self.lower, "lower", nonnegative=True)
        upper = check_vector(self.upper, "upper", dim=lower.shape[0])
        bad = np.flatnonzero(lower > upper)
        if bad.size:
            raise InfeasibleShrinkError(bad[0], lower[bad[0]], upper[bad[0]])
        if lower.sum() > 1.0 + MEMBERSHIP_TOL or upper.sum() < 1.0 - MEMBERSHIP_TOL:
            raise InvalidArgumentError(
                "capped simplex is empty: need sum(lower) <= 1 <= sum(upper)"
            )
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self):
        return self.lower.shape[0]

    @property
    def norm_bound(self):
        return 1.0

    @property
    def diameter(self):
        return float(np.sqrt(2.0))

    def project(self, y):
        arr, single = _as_batch(y, self.dim)
        # sum(clip(y - tau, lower, upper)) is nonincreasing in tau; bisect for 1.
        lo = (arr - self.upper[None, :]).min(axis=1) - 1.0
        hi = (arr - self.lower[None, :]).max(axis=1) + 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            s = np.clip(arr - mid[:, None], self.lower, self.upper).sum(axis=1)
            above = s > 1.0
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
            if np.all(hi - lo < 1e-15):
                break
        out = np.clip(arr - 0.5 * (lo + hi)[:, None], self.lower, self.upper)
        return out[0] if single else out

    def contains(self, x, tol=MEMBERSHIP_TOL):
        arr, _ = _as_batch(x, self.dim)
        return bool(
            np.all(arr >= self.lower - tol)
            and np.all(arr <= self.upper + tol)
            and np.all(np.abs(arr.sum(axis=1) - 1.0) <= tol)
        )

    def center(self):
        return self.project(np.full(self.dim, 1.0 / self.dim))

    def __repr__(self):
        return f"CappedSimplex(lower={self.lower.tolist()}, upper={self.upper.tolist()})"


@dataclass(frozen=True, eq=False)
class PriceBall:
    """Nonnegative prices of bounded Euclidean norm.

    Projection clamps to the orthant first and then rescales radially, which is
    the exact Euclidean projection onto the ball/orthant intersection.
    """

    radius: float
    dim: int

    def __post_init__(self):
        check_scalar(self.radius, "radius", lower=0.0, lower_inclusive=False)
        check_scalar(self.dim, "dim", lower=1, integer=True)

    @property
    def diameter(self):
        return float(self.radius)

    def project(self, y):
        arr, single = _as_batch(y, self.dim)
        out = np.maximum(arr, 0.0)
        norms = np.linalg.norm(out, axis=1)
        scale = np.where(norms > self.radius, self.radius / np.maximum(norms, 1e-300), 1.0)
        out = out * scale[:, None]
        return out[0] if single else out

    def contains(self, x, tol=MEMBERSHIP_TOL):
        arr, _ = _as_batch(x, self.dim)
        return bool(np.all(arr >= -tol) and np.all(np.linalg.norm(arr, axis=1) <= self.radius * (1 + tol) + tol))


FeasibleSet = Box | Simplex | CappedSimplex


def project(F, y):
    """Euclidean projection of ``y`` onto ``F``."""
    return F.project(y)


def shrunk_box(F, supply, xi):
    """Shrink a box to ``{x in F : xi <= x_j <= s_j - xi}``."""
    if not isinstance(F, Box):
        raise InvalidArgumentError("shrunk_box requires a Box feasible set")
    s = check_vector(supply, "supply", dim=F.dim, positive=True)
    check_scalar(xi, "xi", lower=0.0, lower_inclusive=False)
    lower = np.maximum(F.lower, xi)
    upper = np.minimum(F.upper, s - xi)
    bad = np.flatnonzero(lower >= upper)
    if bad.size:
        j = bad[0]
        raise InfeasibleShrinkError(j, lower[j], upper[j])
    return Box(lower, upper)


def shrunk_set(F, supply, xi):
    """Shrunken feasible set for the outer welfare loop.

    Boxes shrink coordinatewise; the simplex becomes a capped simplex whose
    floor ``xi`` keeps every coordinate strictly positive (hence inducible).
    """
    if isinstance(F, Box):
        return shrunk_box(F, supply, xi)
    if isinstance(F, Simplex):
        s = check_vector(supply, "supply", dim=F.dim, positive=True)
        check_scalar(xi, "xi", lower=0.0, lower_inclusive=False)
        lower = np.full(F.dim, float(xi))
        upper = np.minimum(1.0, s - xi)
        bad = np.flatnonzero(lower > upper)
        if bad.size:
            j = bad[0]
            raise InfeasibleShrinkError(j, lower[j], upper[j])
        return CappedSimplex(lower, upper)
    raise InvalidArgumentError(f"cannot shrink feasible set of type {type(F).__name__}")
