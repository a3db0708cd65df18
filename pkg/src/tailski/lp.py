"""Exact linear program over the support (0, L_b] plus infinity.

Variables are the masses ``f_1 .. f_K`` at ``tau .. K tau`` (``K tau <= L_b``),
the mass at infinity and the ratio bound lambda. Beyond the rows displayed
for the program, two rows at infinity are added: the expected ratio when the
adversary never stops, and ``f_inf <= delta``. Without them the program can
park all mass at infinity for free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray
from scipy.optimize import linprog

from tailski import simplex
from tailski.badinterval import bad_interval, grid_span
from tailski.binsearch import SolveResult
from tailski.greedy import world_check
from tailski.model import TIME_TOL, ProblemConfig, PurchaseDistribution, SolverError, TimeGrid
from tailski.ratio import sup_expected_cr

Backend = Literal["auto", "simplex", "highs"]

# Largest K handled by the dense bundled simplex under backend="auto".
DENSE_LIMIT = 400
HIGHS_TOL = 1e-10
LAMBDA_TOL = 1e-7


class LPInfeasibleError(SolverError):
    """The program has no feasible point; ``rows`` names the conflicting rows."""

    def __init__(self, message: str, rows: list[str]) -> None:
        super().__init__(f"{message}: {', '.join(rows) if rows else 'no row identified'}")
        self.rows = rows


@dataclass(frozen=True)
class CRRow:
    name: str
    x: float  # inf for the row at infinity
    low: bool  # use the x <= 1 form


@dataclass(frozen=True)
class MassRow:
    name: str
    x: float
    lo: int  # grid points lo+1..hi are in the bad interval
    hi: int
    with_inf: bool


@dataclass(frozen=True)
class LPInstance:
    config: ProblemConfig
    grid: TimeGrid
    cr_rows: tuple[CRRow, ...]
    mass_rows: tuple[MassRow, ...]

    @property
    def k(self) -> int:
        return self.grid.count

    @property
    def n_variables(self) -> int:
        return self.k + 2

    @property
    def n_rows(self) -> int:
        return len(self.cr_rows) + len(self.mass_rows) + 1

    @property
    def variable_names(self) -> list[str]:
        width = max(4, len(str(self.k)))
        return [f"f_{i:0{width}d}" for i in range(1, self.k + 1)] + ["f_inf", "lambda"]

    def cr_coefficients(self, row: CRRow) -> NDArray[np.float64]:
        """Coefficients of ``f_1..f_K, f_inf`` in the ratio at ``row.x``."""
        a = self.config.a
        t = self.grid.times
        out = np.empty(self.k + 1)
        if math.isinf(row.x):
            out[:-1] = 1.0
            out[-1] = 1.0 / a
            return out
        x = row.x
        before = t <= x + TIME_TOL
        if row.low:
            out[:-1] = np.where(before, (t + 1.0 - a + a * (x - t)) / x, 1.0)
            out[-1] = 1.0
        else:
            d = 1.0 - a + a * x
            out[:-1] = np.where(before, (t + 1.0 - a + a * (x - t)) / d, x / d)
            out[-1] = x / d
        return out

    def mass_coefficients(self, row: MassRow) -> NDArray[np.float64]:
        out = np.zeros(self.k + 1)
        out[row.lo : row.hi] = 1.0
        out[-1] = 1.0 if row.with_inf else 0.0
        return out

    def rows(self) -> tuple[NDArray[np.float64], NDArray[np.float64], list[str]]:
        """Unscaled ``A_ub @ v <= b_ub`` over ``v = (f, f_inf, lambda)``."""
        n = self.n_variables
        A = np.zeros((len(self.cr_rows) + len(self.mass_rows), n))
        b = np.zeros(A.shape[0])
        names = []
        for i, row in enumerate(self.cr_rows):
            A[i, :-1] = self.cr_coefficients(row)
            A[i, -1] = -1.0
            names.append(row.name)
        offset = len(self.cr_rows)
        for j, row in enumerate(self.mass_rows):
            A[offset + j, :-1] = self.mass_coefficients(row)
            b[offset + j] = self.config.delta
            names.append(row.name)
        return A, b, names

    def dense(self) -> simplex.LinearProgram:
        """Dense program with every row scaled by its largest coefficient."""
        A, b, _ = self.rows()
        scale = np.abs(A).max(axis=1)
        A = A / scale[:, None]
        b = b / scale
        c = np.zeros(self.n_variables)
        c[-1] = 1.0
        A_eq = np.ones((1, self.n_variables))
        A_eq[0, -1] = 0.0
        return simplex.LinearProgram(c, A, b, A_eq, np.array([1.0]))

    def to_lp_text(self) -> str:
        """The program in CPLEX LP format."""
        A, b, names = self.rows()
        var = self.variable_names

        def expr(coefs: NDArray[np.float64]) -> str:
            terms = [f"{'+' if c >= 0 else '-'} {abs(c):.17g} {var[j]}"
                     for j, c in enumerate(coefs) if c != 0.0]
            return " ".join(terms) if terms else "0 lambda"

        lines = ["\\ two-slope ski rental with tail constraint", "Minimize", " obj: + 1 lambda",
                 "Subject To"]
        for name, row, rhs in zip(names, A, b):
            lines.append(f" {name}: {expr(row)} <= {rhs:.17g}")
        total = np.ones(self.n_variables)
        total[-1] = 0.0
        lines.append(f" total: {expr(total)} = 1")
        lines += ["Bounds", " lambda >= 0", "End", ""]
        return "\n".join(lines)


def build_lp(config: ProblemConfig) -> LPInstance:
    """The program for ``config`` on the grid ``tau .. K tau`` with ``K tau <= L_b``.

    Mass rows whose bad interval holds no grid point are dropped. The row at
    ``x = 1`` is emitted in both ratio forms.
    """
    b = config.bounds
    count = config.k_lb
    grid = TimeGrid(config.tau, count)
    k_one = config.k_one
    width = max(4, len(str(count)))

    cr_rows = [CRRow(f"cr_low_{k:0{width}d}", k * config.tau, True) for k in range(1, k_one + 1)]
    cr_rows += [CRRow(f"cr_high_{k:0{width}d}", k * config.tau, False)
                for k in range(k_one, count + 1)]
    cr_rows.append(CRRow("cr_inf", math.inf, False))

    mass_rows: list[MassRow] = []
    if config.tail_active:
        for k in range(1, count + 1):
            x = k * config.tau
            iv = bad_interval(x, config.a, config.gamma)
            if iv.is_empty:
                continue
            lo, hi = grid_span(iv.left, iv.right, config.tau, count)
            if hi > lo or iv.includes_infinity:
                mass_rows.append(MassRow(f"mass_{k:0{width}d}", x, lo, hi, iv.includes_infinity))
        # Every x past L5 has the suffix interval, which holds only f_inf here
        # since its left end exceeds L_b.
        if b.l5 < math.inf:
            mass_rows.append(MassRow("mass_inf", math.inf, count, count, True))
    return LPInstance(config, grid, tuple(cr_rows), tuple(mass_rows))


def _solve_simplex(instance: LPInstance) -> tuple[NDArray[np.float64], str]:
    lp = instance.dense()
    try:
        sol = simplex.solve(lp)
    except simplex.SimplexError as exc:
        raise SolverError(f"bundled simplex failed: {exc}") from exc
    if sol.status is simplex.Status.INFEASIBLE:
        raise LPInfeasibleError("bundled simplex reports infeasible", _violated_rows(instance))
    if sol.status is not simplex.Status.OPTIMAL:
        raise SolverError(f"bundled simplex ended with status {sol.status.value}")
    return sol.x, f"simplex ({sol.iterations} pivots)"


def _lifted(instance: LPInstance):
    """Sparse form with running sums ``P0_k = sum f``, ``P1_k = sum t f``.

    Each ratio row only touches ``P0_k``, ``P1_k`` and the two last variables,
    so the matrix has O(K) nonzeros instead of O(K^2).
    """
    a, delta = instance.config.a, instance.config.delta
    k = instance.k
    t = instance.grid.times
    f_inf, lam = k, k + 1
    p0 = k + 2 + np.arange(k)  # column of P0_{i+1}
    p1 = 2 * k + 2 + np.arange(k)
    n = 3 * k + 2

    rows, cols, vals, rhs = [], [], [], []

    def add(entries: list[tuple[int, float]], value: float) -> None:
        r = len(rhs)
        scale = max(abs(v) for _, v in entries)
        for c, v in entries:
            rows.append(r)
            cols.append(c)
            vals.append(v / scale)
        rhs.append(value / scale)

    for row in instance.cr_rows:
        if math.isinf(row.x):
            add([(p0[-1], 1.0), (f_inf, 1.0 / a), (lam, -1.0)], 0.0)
            continue
        x = row.x
        i = instance.config.index_of(x) - 1
        if row.low:
            add([(p0[i], (1.0 - a) * (1.0 - x) / x), (p1[i], (1.0 - a) / x), (lam, -1.0)], -1.0)
        else:
            d = 1.0 - a + a * x
            entries = [(p0[i], (1.0 - a) * (1.0 - x) / d), (p1[i], (1.0 - a) / d), (lam, -1.0)]
            add([e for e in entries if e[1] != 0.0], -x / d)
    for mrow in instance.mass_rows:
        entries = []
        if mrow.hi > 0:
            entries.append((p0[mrow.hi - 1], 1.0))
        if mrow.lo > 0:
            entries.append((p0[mrow.lo - 1], -1.0))
        if mrow.with_inf:
            entries.append((f_inf, 1.0))
        add(entries, delta)
    A_ub = sp.csr_matrix((vals, (rows, cols)), shape=(len(rhs), n))
    b_ub = np.array(rhs)

    erows, ecols, evals = [], [], []
    for i in range(k):
        for col, v in ((p0[i], 1.0), (i, -1.0)):
            erows.append(2 * i)
            ecols.append(col)
            evals.append(v)
        for col, v in ((p1[i], 1.0), (i, -t[i])):
            erows.append(2 * i + 1)
            ecols.append(col)
            evals.append(v)
        if i > 0:
            erows += [2 * i, 2 * i + 1]
            ecols += [p0[i - 1], p1[i - 1]]
            evals += [-1.0, -1.0]
    erows += [2 * k, 2 * k]
    ecols += [p0[-1], f_inf]
    evals += [1.0, 1.0]
    A_eq = sp.csr_matrix((evals, (erows, ecols)), shape=(2 * k + 1, n))
    b_eq = np.zeros(2 * k + 1)
    b_eq[-1] = 1.0
    c = np.zeros(n)
    c[lam] = 1.0
    return c, A_ub, b_ub, A_eq, b_eq


def _solve_highs(instance: LPInstance) -> tuple[NDArray[np.float64], str]:
    c, A_ub, b_ub, A_eq, b_eq = _lifted(instance)
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=(0, None),
        method="highs",
        options={
            "primal_feasibility_tolerance": HIGHS_TOL,
            "dual_feasibility_tolerance": HIGHS_TOL,
            "presolve": True,
        },
    )
    if res.status == 2:
        raise LPInfeasibleError("HiGHS reports infeasible", _violated_rows(instance))
    if res.status != 0:
        raise SolverError(f"HiGHS failed: {res.message}")
    return res.x[: instance.n_variables], "highs"


def _violated_rows(instance: LPInstance) -> list[str]:
    """Rows that need positive slack in a least-violation relaxation."""
    A, b, names = instance.rows()
    m, n = A.shape
    # Variables: v (n), then one elastic slack per inequality row.
    A_el = sp.hstack([sp.csr_matrix(A), -sp.identity(m, format="csr")])
    total = np.ones(n)
    total[-1] = 0.0
    A_eq = sp.csr_matrix(np.concatenate((total, np.zeros(m)))[None, :])
    c = np.concatenate((np.zeros(n), np.ones(m)))
    res = linprog(c, A_ub=A_el, b_ub=b, A_eq=A_eq, b_eq=[1.0], bounds=(0, None), method="highs")
    if res.status != 0:
        return ["total"]
    slack = res.x[n:]
    return [names[i] for i in np.flatnonzero(slack > 1e-9)]


def _backend_for(instance: LPInstance, backend: Backend) -> str:
    if backend == "auto":
        return "simplex" if instance.k <= DENSE_LIMIT else "highs"
    if backend not in ("simplex", "highs"):
        raise ValueError(f"unknown LP backend {backend!r}")
    return backend


def lp_solver_backend(instance: LPInstance, backend: Backend = "auto") -> tuple[NDArray[np.float64], str]:
    """Primal solution ``(f_1..f_K, f_inf, lambda)`` and a backend label."""
    if _backend_for(instance, backend) == "simplex":
        return _solve_simplex(instance)
    return _solve_highs(instance)


def solve_lp(instance: LPInstance, backend: Backend = "auto") -> SolveResult:
    """Optimal distribution of the program and its value lambda*.

    Tiny negative masses from the backend are clipped and the result is
    renormalised. Raises SolverError if lambda* and the recomputed worst
    ratio differ by more than 1e-7.
    """
    config = instance.config
    v, label = lp_solver_backend(instance, backend)
    lam = float(v[-1])
    masses = np.clip(v[: instance.k], 0.0, None)
    mass_inf = max(0.0, float(v[instance.k]))
    total = math.fsum(masses) + mass_inf
    masses = masses / total
    mass_inf /= total
    distribution = PurchaseDistribution(config.tau, masses, mass_inf)

    sup_cr, argmax = sup_expected_cr(distribution, config.a)
    if abs(sup_cr - lam) > LAMBDA_TOL:
        raise SolverError(f"LP value {lam!r} disagrees with recomputed ratio {sup_cr!r}")
    world = world_check(masses, lam, config)
    return SolveResult(
        distribution=distribution,
        opt_estimate=lam,
        world=world,
        iterations=0,
        bracket=(lam, lam),
        solver="lp",
        config=config,
        diagnostics={
            "backend": label,
            "sup_cr": sup_cr,
            "argmax": argmax,
            "raw_total": total,
            "variables": instance.n_variables,
            "rows": instance.n_rows,
        },
    )
