"""Small dense linear programs: two-phase tableau simplex and basis enumeration.

Both routines solve ``max c^T x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq``
and ``x >= 0``. They are meant for the lottery benchmark, whose programs have a
few dozen variables at most.
"""

from __future__ import annotations

import itertools
from math import comb
from dataclasses import dataclass

import numpy as np

from .exceptions import StructuralError

PIVOT_TOL = 1e-9
MAX_PIVOTS = 50_000
MAX_BASES = 2_000_000


@dataclass(frozen=True, eq=False)
class LPResult:
    x: np.ndarray
    value: float
    pivots: int = 0


def _standard_form(c, A_ub, b_ub, A_eq, b_eq):
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    A = np.zeros((m_ub + m_eq, n + m_ub))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    cost = np.concatenate([c, np.zeros(m_ub)])
    return A, b, cost, n


def _pivot(T, row, col):
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]


def _run_phase(T, basis, cost, allowed, pivots):
    """Maximize ``cost @ x`` on the tableau with Bland's anti-cycling rule."""
    while True:
        reduced = cost - cost[basis] @ T[:, :-1]
        entering = np.flatnonzero((reduced > PIVOT_TOL) & allowed)
        if entering.size == 0:
            return pivots
        col = int(entering[0])
        column = T[:, col]
        rows = np.flatnonzero(column > PIVOT_TOL)
        if rows.size == 0:
            raise StructuralError("linear program is unbounded")
        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(T, row, col)
        basis[row] = col
        pivots += 1
        if pivots > MAX_PIVOTS:
            raise StructuralError("simplex exceeded its pivot budget")


def simplex(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None):
    """Two-phase dense tableau simplex with Bland's rule."""
    A, b, cost, n = _standard_form(c, A_ub, b_ub, A_eq, b_eq)
    m, n_std = A.shape
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    T = np.hstack([A, np.eye(m), b[:, None]])
    basis = list(range(n_std, n_std + m))
    n_all = n_std + m
    phase1 = np.concatenate([np.zeros(n_std), -np.ones(m)])
    pivots = _run_phase(T, basis, phase1, np.ones(n_all, dtype=bool), 0)
    infeasibility = -phase1[basis] @ T[:, -1]
    if infeasibility > 1e-7 * max(1.0, float(np.abs(b).max(initial=0.0))):
        raise StructuralError(f"linear program is infeasible (phase-one residual {infeasibility:.3g})")

    # Drive remaining artificial variables out of the basis, dropping redundant rows.
    keep = []
    for r in range(m):
        if basis[r] < n_std:
            keep.append(r)
            continue
        cols = np.flatnonzero(np.abs(T[r, :n_std]) > PIVOT_TOL)
        if cols.size:
            _pivot(T, r, int(cols[0]))
            basis[r] = int(cols[0])
            keep.append(r)
    T = T[keep]
    basis = [basis[r] for r in keep]

    allowed = np.zeros(n_all, dtype=bool)
    allowed[:n_std] = True
    full_cost = np.concatenate([cost, np.zeros(m)])
    pivots = _run_phase(T, basis, full_cost, allowed, pivots)
    x = np.zeros(n_all)
    x[basis] = T[:, -1]
    x = x[:n]
    return LPResult(x, float(np.asarray(c, dtype=float) @ x), pivots)


def vertex_enumeration(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None):
    """Exact optimum by checking every basic solution (tiny programs only)."""
    A, b, cost, n = _standard_form(c, A_ub, b_ub, A_eq, b_eq)
    m, n_std = A.shape
    if np.linalg.matrix_rank(A) < m:
        raise StructuralError("vertex enumeration needs constraint rows of full rank")
    if comb(n_std, m) > MAX_BASES:
        raise StructuralError("too many candidate bases for enumeration")
    best_x, best_val = None, -np.inf
    for cols in itertools.combinations(range(n_std), m):
        B = A[:, cols]
        if abs(np.linalg.det(B)) < PIVOT_TOL:
            continue
        xb = np.linalg.solve(B, b)
        if np.any(xb < -1e-9):
            continue
        x = np.zeros(n_std)
        x[list(cols)] = np.maximum(xb, 0.0)
        val = cost @ x
        if val > best_val + 1e-12:
            best_x, best_val = x, val
    if best_x is None:
        raise StructuralError("linear program is infeasible")
    return LPResult(best_x[:n], float(best_val))

