"""Left-to-right greedy placement of mass for a guessed (or known) optimum.

The greedy pass walks the grid once. At each time x it places the largest
mass that keeps both the T-CR constraint at x and the bad-interval budget
of x satisfied. Right after time 1 it decides between two worlds: if a
zero mass keeps the ratio flat, the rest of the mass goes to infinity
(world 1); otherwise mass keeps flowing onto finite points (world 2).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import NDArray

from tailski.badinterval import bad_interval, grid_span
from tailski.model import (
    TIME_TOL,
    WORLD_TOL,
    ProblemConfig,
    PurchaseDistribution,
    SolverError,
)

SUM_TOL = 1e-12
# A suffix budget below this is summation noise and counts as exhausted.
BUDGET_FLOOR = 1e-14


class Termination(enum.Enum):
    MASS_REACHED_ONE = "mass_reached_one"
    WORLD_ONE_EXIT = "world_one_exit"
    SUFFIX_BUDGET_EXHAUSTED = "suffix_budget_exhausted"
    CAP_HIT = "cap_hit"


class World(enum.IntEnum):
    WORLD1 = 1
    WORLD2 = 2


class CapHitError(SolverError):
    """The greedy pass ran past ``x_max`` without terminating."""

    def __init__(self, message: str, partial: PartialDistribution) -> None:
        super().__init__(message)
        self.partial = partial


class WorldCheckError(SolverError):
    pass


class GreedyMassError(SolverError):
    """The known-OPT greedy did not end with unit mass: ``opt`` was not optimal."""


@dataclass(frozen=True)
class PartialDistribution:
    """Output of one greedy pass; masses need not sum to one."""

    tau: float
    masses: NDArray[np.float64]
    mass_inf: float | None
    termination: Termination
    guess: float
    clamped: int = 0
    world: World | None = None
    stats: dict[str, Any] = field(default_factory=dict)

    @property
    def finite_total(self) -> float:
        return math.fsum(self.masses)

    @property
    def total(self) -> float:
        return self.finite_total + (self.mass_inf or 0.0)


def f_one_plus_tau(s0: float, s1: float, a: float, tau: float) -> float:
    """Mass at 1 + tau that keeps the ratio tight, given a prefix tight at 1."""
    return tau * (s0 - 1.0 + a * s1)


def _zero_mass_cr_after_one(s0: float, s1: float, a: float, tau: float) -> float:
    """Ratio at 1 + tau when nothing is bought there (remaining mass unplaced)."""
    x = 1.0 + tau
    d = 1.0 - a + a * x
    return x / d + (1.0 - a) * ((1.0 - x) * s0 + s1) / d


def _classify(config: ProblemConfig, s0: float, s1: float, guess: float) -> tuple[World, float]:
    """World after the [0, 1] prefix and the CR-tight mass at 1 + tau.

    A mass whose ratio effect is within WORLD_TOL counts as zero, unless the
    world-1 exit would put more than delta at infinity.
    """
    a, tau = config.a, config.tau
    d = 1.0 + a * tau
    slack = guess - _zero_mass_cr_after_one(s0, s1, a, tau)
    amount = slack * d / (1.0 - a)
    if slack < -WORLD_TOL:
        return World.WORLD1, amount
    if slack <= WORLD_TOL and a * (guess - s0) <= config.delta + SUM_TOL:
        return World.WORLD1, amount
    return World.WORLD2, amount


def world_check(prefix: NDArray[np.float64], opt: float, config: ProblemConfig) -> World:
    """World 1 iff a zero mass at 1 + tau keeps the ratio equal to ``opt``.

    ``prefix`` holds the masses at tau, 2 tau, ..., 1. The equality test is
    cross-checked against the sign of the closed-form mass at 1 + tau.
    """
    a, tau = config.a, config.tau
    prefix = np.asarray(prefix, dtype=float)
    k1 = config.k_one
    if prefix.size < k1:
        prefix = np.concatenate((prefix, np.zeros(k1 - prefix.size)))
    prefix = prefix[:k1]
    t = tau * np.arange(1, k1 + 1, dtype=float)
    s0 = math.fsum(prefix)
    s1 = math.fsum(t * prefix)

    world, amount = _classify(config, s0, s1, opt)
    closed_form = f_one_plus_tau(s0, s1, a, tau)
    closed_world = World.WORLD2 if closed_form > WORLD_TOL * (1.0 + a * tau) / (1.0 - a) else World.WORLD1
    # The closed form assumes the prefix is CR-tight at 1 for `opt`.
    tight_at_one = abs(1.0 + (1.0 - a) * s1 - opt) <= 1e-7
    if tight_at_one and abs(closed_form - amount) > 1e-7:
        raise WorldCheckError(
            f"mass at 1+tau disagrees: direct {amount!r} vs closed form {closed_form!r}"
        )
    if tight_at_one and closed_world != world and abs(closed_form) > 1e-7:
        raise WorldCheckError(f"world tests disagree ({world} vs {closed_world})")
    return world


def _cr_tight_amount(x: float, s0: float, s1: float, a: float, guess: float) -> float:
    """Mass at x making the T-CR at x equal ``guess`` given sums over t < x."""
    if x <= 1.0 + TIME_TOL:
        return x * (guess - 1.0) / (1.0 - a) - ((1.0 - x) * s0 + s1)
    d = 1.0 - a + a * x
    return (d * guess - x) / (1.0 - a) - ((1.0 - x) * s0 + s1)


def alg_subroutine(config: ProblemConfig, guess: float) -> PartialDistribution:
    """One greedy pass with ``guess`` standing in for the optimal ratio.

    No atom takes more than the mass still missing from one unit, so the
    total never exceeds one; what the tight amount would have added beyond
    that is kept in ``stats["overshoot"]``. Raises CapHitError if the pass
    runs past ``config.resolved_x_max``.
    """
    a, gamma, delta, tau = config.a, config.gamma, config.delta, config.tau
    b = config.bounds
    k_one = config.k_one
    k_lb = config.k_lb
    k_cap = int(round(config.resolved_x_max / tau))

    masses: list[float] = []
    cum = [0.0]  # cum[k] = sum of the first k masses
    s0 = s1 = 0.0
    clamped = 0
    overshoot = 0.0
    world: World | None = None

    def finish(term: Termination, mass_inf: float | None = None, **stats: Any) -> PartialDistribution:
        return PartialDistribution(
            tau=tau,
            masses=np.array(masses),
            mass_inf=mass_inf,
            termination=term,
            guess=guess,
            clamped=clamped,
            world=world,
            stats=stats,
        )

    k = 0
    while True:
        k += 1
        x = k * tau
        if s0 >= 1.0 - SUM_TOL:
            return finish(Termination.MASS_REACHED_ONE, overshoot=overshoot)
        if k > k_cap:
            raise CapHitError(
                f"greedy pass for T={guess!r} passed x_max={config.resolved_x_max!r} "
                f"with mass {s0!r}",
                finish(Termination.CAP_HIT),
            )

        amount = _cr_tight_amount(x, s0, s1, a, guess)
        if k == k_one + 1:
            world, amount = _classify(config, s0, s1, guess)
            if world is World.WORLD1:
                # Infinity lies in every suffix-shaped bad interval, so it can
                # hold at most delta; that cap only binds for guesses below OPT.
                exit_mass = a * (guess - s0)
                return finish(
                    Termination.WORLD_ONE_EXIT,
                    min(exit_mass, delta, 1.0 - s0),
                    amount_at_one_plus_tau=amount,
                    uncapped_mass_inf=exit_mass,
                    overshoot=max(0.0, exit_mass - (1.0 - s0)),
                )

        suffix_stage = x > b.l5 + TIME_TOL and config.tail_active
        if suffix_stage:
            budget = delta - (cum[k - 1] - cum[k_lb])
            amount = min(amount, budget)
        else:
            iv = bad_interval(x, a, gamma)
            if not iv.is_empty:
                lo, hi = grid_span(iv.left, iv.right, tau, k - 1)
                amount = min(amount, delta - (cum[hi] - cum[lo]))

        if amount < 0.0:
            if amount < -1e-12:
                clamped += 1
            amount = 0.0
        if suffix_stage and amount <= BUDGET_FLOOR:
            return finish(Termination.SUFFIX_BUDGET_EXHAUSTED)
        if amount > 1.0 - s0:
            # The atom that completes the unit only gets the missing mass.
            overshoot = amount - (1.0 - s0)
            amount = 1.0 - s0

        masses.append(amount)
        s0 += amount
        s1 += x * amount
        cum.append(cum[-1] + amount)


def greedy_with_opt(
    config: ProblemConfig, opt: float, mass_tol: float = 1e-6
) -> tuple[PurchaseDistribution, World]:
    """The greedy solution for a known optimum ``opt``.

    World 1 puts ``(opt - 1) / (1/a - 1)`` at infinity. World 2 places mass
    until one unit is reached, cutting the last atom. Raises GreedyMassError
    when the total misses one by more than ``mass_tol``, or when unit mass
    is already reached inside [0, 1] (which only happens for opt above the
    optimum).
    """
    partial = alg_subroutine(config, opt)
    a = config.a
    masses = partial.masses.copy()
    if partial.termination is Termination.WORLD_ONE_EXIT:
        mass_inf = (opt - 1.0) / (1.0 / a - 1.0)
        total = math.fsum(masses) + mass_inf
        if abs(total - 1.0) > mass_tol:
            raise GreedyMassError(f"world-1 greedy mass is {total!r} for opt={opt!r}")
        return PurchaseDistribution(config.tau, masses, mass_inf), World.WORLD1
    total = partial.finite_total + partial.stats.get("overshoot", 0.0)
    if abs(total - 1.0) > mass_tol:
        raise GreedyMassError(f"greedy mass is {total!r} for opt={opt!r}")
    if masses.size <= config.k_one:
        raise GreedyMassError(f"greedy reached unit mass by time 1 for opt={opt!r}")
    cum = np.cumsum(masses)
    k_star = int(np.searchsorted(cum, 1.0 - SUM_TOL))
    k_star = min(k_star, masses.size - 1)
    before = float(cum[k_star - 1]) if k_star > 0 else 0.0
    masses = masses[: k_star + 1]
    masses[k_star] = max(0.0, 1.0 - before)
    return PurchaseDistribution(config.tau, masses, 0.0), World.WORLD2
