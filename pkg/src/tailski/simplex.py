"""Dense two-phase simplex with Bland's rule.

Solves ``min c @ x`` subject to ``A_ub @ x <= b_ub``, ``A_eq @ x == b_eq``
and ``x >= 0``. Meant for desk-scale instances (a few hundred columns).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

PIVOT_TOL = 1e-7
COST_TOL = 1e-10
REFRESH_EVERY = 50
MAX_ITERATIONS = 1_000_000


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


class SimplexError(RuntimeError):
    pass


@dataclass(frozen=True)
class LinearProgram:
    c: NDArray[np.float64]
    A_ub: NDArray[np.float64]
    b_ub: NDArray[np.float64]
    A_eq: NDArray[np.float64]
    b_eq: NDArray[np.float64]

    @property
    def n(self) -> int:
        return int(self.c.size)


@dataclass(frozen=True)
class LPSolution:
    x: NDArray[np.float64]
    objective: float
    status: Status
    iterations: int


def _pivot(tab: NDArray[np.float64], row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    factors = tab[:, col].copy()
    factors[row] = 0.0
    tab -= np.outer(factors, tab[row])


def _refresh(tab: NDArray[np.float64], orig: NDArray[np.float64], cost: NDArray[np.float64], basis: list[int]) -> None:
    """Rebuild the tableau from the original rows to shed accumulated roundoff."""
    try:
        tab[:-1] = np.linalg.solve(orig[:, basis], orig)
    except np.linalg.LinAlgError as exc:
        raise SimplexError("basis became singular; the program is too ill-conditioned") from exc
    tab[-1] = cost - cost[basis] @ tab[:-1]


def _run(
    tab: NDArray[np.float64],
    orig: NDArray[np.float64],
    cost: NDArray[np.float64],
    basis: list[int],
    allowed: int,
    iterations: int,
    max_iterations: int,
) -> tuple[Status, int]:
    """Bland-rule iterations on a tableau whose last row is the cost row.

    ``orig`` holds the constraint rows (with rhs) as first built and ``cost``
    the phase objective, padded with a zero for the rhs column.
    """
    m = tab.shape[0] - 1
    since_refresh = 0
    while True:
        if iterations >= max_iterations:
            return Status.ITERATION_LIMIT, iterations
        if since_refresh >= REFRESH_EVERY:
            _refresh(tab, orig, cost, basis)
            since_refresh = 0
        costs = tab[-1, :allowed]
        candidates = np.flatnonzero(costs < -COST_TOL)
        if candidates.size == 0:
            if since_refresh:
                # Confirm optimality on a clean tableau.
                _refresh(tab, orig, cost, basis)
                since_refresh = 0
                continue
            return Status.OPTIMAL, iterations
        col = int(candidates[0])
        column = tab[:m, col]
        rows = np.flatnonzero(column > PIVOT_TOL)
        if rows.size == 0:
            return Status.UNBOUNDED, iterations
        ratios = np.maximum(tab[rows, -1], 0.0) / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(tab, row, col)
        basis[row] = col
        iterations += 1
        since_refresh += 1


def solve(lp: LinearProgram, max_iterations: int = MAX_ITERATIONS) -> LPSolution:
    c = np.asarray(lp.c, dtype=float)
    n = c.size
    A_ub = np.asarray(lp.A_ub, dtype=float).reshape(-1, n)
    A_eq = np.asarray(lp.A_eq, dtype=float).reshape(-1, n)
    b_ub = np.asarray(lp.b_ub, dtype=float).ravel()
    b_eq = np.asarray(lp.b_eq, dtype=float).ravel()
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # Columns: originals | slacks | artificials | rhs.
    A = np.vstack((A_ub, A_eq))
    b = np.concatenate((b_ub, b_eq))
    slack = np.vstack((np.eye(m_ub), np.zeros((m_eq, m_ub))))
    flip = b < 0
    A[flip] *= -1.0
    slack[flip] *= -1.0
    b[flip] *= -1.0
    needs_art = np.ones(m, dtype=bool)
    needs_art[:m_ub] = flip[:m_ub]
    art_rows = np.flatnonzero(needs_art)
    art = np.zeros((m, art_rows.size))
    art[art_rows, np.arange(art_rows.size)] = 1.0

    n_real = n + m_ub
    width = n_real + art_rows.size
    tab = np.zeros((m + 1, width + 1))
    tab[:m, :n] = A
    tab[:m, n:n_real] = slack
    tab[:m, n_real:width] = art
    tab[:m, -1] = b

    basis = [0] * m
    for i in range(m):
        basis[i] = n + i if i < m_ub and not flip[i] else -1
    for j, i in enumerate(art_rows):
        basis[i] = n_real + j

    iterations = 0
    keep = np.ones(m + 1, dtype=bool)
    if art_rows.size:
        orig = tab[:m].copy()
        cost = np.zeros(width + 1)
        cost[n_real:width] = 1.0
        tab[-1] = cost
        for i in art_rows:
            tab[-1] -= tab[i]
        status, iterations = _run(tab, orig, cost, basis, width, iterations, max_iterations)
        if status is Status.ITERATION_LIMIT:
            raise SimplexError("iteration cap reached in phase 1 (cycling guard)")
        if -tab[-1, -1] > 1e-9 * max(1.0, np.abs(b).max()):
            return LPSolution(np.full(n, np.nan), np.nan, Status.INFEASIBLE, iterations)
        # Drive remaining artificials out of the basis; drop redundant rows.
        for i in range(m):
            if basis[i] >= n_real:
                nonzero = np.flatnonzero(np.abs(tab[i, :n_real]) > PIVOT_TOL)
                if nonzero.size:
                    _pivot(tab, i, int(nonzero[0]))
                    basis[i] = int(nonzero[0])
                else:
                    keep[i] = False
        tab = tab[keep]
        basis = [bi for bi, k in zip(basis, keep[:m]) if k]
        tab = np.delete(tab, np.s_[n_real:width], axis=1)

    # Phase 2 starts from a clean tableau built from the original rows.
    orig = np.hstack((A, slack, b[:, None]))[keep[:m]]
    cost = np.zeros(n_real + 1)
    cost[:n] = c
    _refresh(tab, orig, cost, basis)
    status, iterations = _run(tab, orig, cost, basis, n_real, iterations, max_iterations)
    if status is Status.ITERATION_LIMIT:
        raise SimplexError("iteration cap reached in phase 2 (cycling guard)")
    if status is Status.UNBOUNDED:
        return LPSolution(np.full(n, np.nan), -np.inf, status, iterations)

    x = np.zeros(n_real)
    for i, j in enumerate(basis):
        x[j] = tab[i, -1]
    x = x[:n]
    return LPSolution(x, float(c @ x), Status.OPTIMAL, iterations)
