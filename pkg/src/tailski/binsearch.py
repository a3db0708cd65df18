"""Bisection on the optimal ratio with the greedy pass as feasibility oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from tailski.greedy import (
    SUM_TOL,
    CapHitError,
    PartialDistribution,
    Termination,
    World,
    alg_subroutine,
)
from tailski.model import ProblemConfig, PurchaseDistribution, SolverError
from tailski.ratio import sup_expected_cr


def classical_ratio(a: float) -> float:
    """Optimal expected ratio without tail constraint, e / (e - 1 + a)."""
    return math.e / (math.e - 1.0 + a)


@dataclass(frozen=True)
class SolveResult:
    distribution: PurchaseDistribution
    opt_estimate: float
    world: World
    iterations: int
    bracket: tuple[float, float]
    solver: str
    config: ProblemConfig
    diagnostics: dict[str, Any] = field(default_factory=dict)


class TruncationError(SolverError):
    pass


def truncate(partial: PartialDistribution) -> PurchaseDistribution:
    """Cut a greedy pass down to a probability distribution.

    Finite mass is kept up to the first point where the running total
    reaches one; that point keeps only the remainder. A world-1 pass keeps
    its finite masses and absorbs the rounding residue at infinity.
    """
    masses = np.array(partial.masses, dtype=float)
    cum = np.cumsum(masses) if masses.size else np.zeros(0)
    finite = float(cum[-1]) if masses.size else 0.0

    if partial.termination is Termination.WORLD_ONE_EXIT and finite < 1.0:
        return PurchaseDistribution(partial.tau, masses, 1.0 - finite)
    if finite < 1.0 - SUM_TOL:
        raise TruncationError(f"cannot truncate: finite mass is only {finite!r}")

    k_star = min(int(np.searchsorted(cum, 1.0 - SUM_TOL)), masses.size - 1)
    before = float(cum[k_star - 1]) if k_star > 0 else 0.0
    masses = masses[: k_star + 1]
    masses[k_star] = 1.0 - before
    return PurchaseDistribution(partial.tau, masses, 0.0)


def _reaches_one(partial: PartialDistribution) -> bool:
    return partial.total >= 1.0 - SUM_TOL


def binary_search(config: ProblemConfig) -> SolveResult:
    """Near-optimal distribution with expected ratio within epsilon of OPT.

    The bracket starts at ``[e/(e-1+a), 2-a]``. If the lower end already
    admits unit mass (possible on a coarse grid) it is widened down to 1.
    """
    a = config.a
    lo, hi = classical_ratio(a), 2.0 - a
    diagnostics: dict[str, Any] = {"bracket_widened": False, "clamped": 0}

    def run(guess: float) -> PartialDistribution:
        try:
            partial = alg_subroutine(config, guess)
        except CapHitError as exc:
            raise CapHitError(f"{exc} (failing T={guess!r})", exc.partial) from exc
        diagnostics["clamped"] += partial.clamped
        return partial

    if _reaches_one(run(lo)):
        diagnostics["bracket_widened"] = True
        lo = 1.0
    upper = run(hi)
    if not _reaches_one(upper):
        raise SolverError(f"no feasible distribution at T = 2 - a = {hi!r}")

    iterations = 0
    while hi - lo > config.epsilon:
        mid = 0.5 * (lo + hi)
        partial = run(mid)
        iterations += 1
        if _reaches_one(partial):
            hi, upper = mid, partial
        else:
            lo = mid

    distribution = truncate(upper)
    opt, argmax = sup_expected_cr(distribution, a)
    world = World.WORLD1 if upper.termination is Termination.WORLD_ONE_EXIT else World.WORLD2
    diagnostics.update(
        termination=upper.termination.value,
        argmax=argmax,
        guess=hi,
        partial_total=upper.total,
    )
    if upper.mass_inf is not None:
        diagnostics["mass_inf_at_exit"] = upper.mass_inf
    return SolveResult(
        distribution=distribution,
        opt_estimate=opt,
        world=world,
        iterations=iterations,
        bracket=(lo, hi),
        solver="binsearch",
        config=config,
        diagnostics=diagnostics,
    )
