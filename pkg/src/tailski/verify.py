"""Independent checks on a purchase distribution.

Feasibility and ratio checks recompute everything from the masses. The
structure report classifies grid points as ratio-tight or mass-tight and
looks for the shapes the optimal solutions are known to have.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import NDArray

from tailski.badinterval import bad_mass_profile
from tailski.binsearch import SolveResult, binary_search
from tailski.greedy import World, world_check
from tailski.lp import Backend, build_lp, solve_lp
from tailski.model import INF, TIME_TOL, ProblemConfig, PurchaseDistribution
from tailski.ratio import PrefixSums, cr_at_infinity, expected_cr_profile

FEASIBILITY_TOL = 1e-9
CR_TOL = 1e-7
TIGHT_TOL = 1e-6
EXP_TOL = 1e-5
MONOTONE_TOL = 1e-9


class Tightness(enum.Enum):
    CR_TIGHT = "cr_tight"
    MASS_TIGHT = "mass_tight"
    NEITHER = "neither"


@dataclass(frozen=True)
class Check:
    """Worst value of a constraint residual and where it occurs."""

    value: float
    worst_x: float
    passed: bool


def check_points(f: PurchaseDistribution, config: ProblemConfig) -> NDArray[np.float64]:
    """Grid points far enough out that every bad interval shape is covered.

    Past L5 the suffix intervals shrink as x grows, so the first grid point
    after L5 dominates all later ones.
    """
    count = max(f.count, config.k_lb)
    if config.bounds.l5 < INF:
        count = max(count, int(math.floor(config.bounds.l5 / config.tau + 1e-6)) + 1)
    return config.tau * np.arange(1, count + 1, dtype=float)


def verify_feasibility(f: PurchaseDistribution, config: ProblemConfig) -> Check:
    """Largest excess of bad-interval mass over delta, at grid points and infinity."""
    xs = check_points(f, config)
    excess = bad_mass_profile(f, xs, config.a, config.gamma) - config.delta
    i = int(np.argmax(excess))
    value, worst = float(excess[i]), float(xs[i])
    at_inf = f.mass_inf - config.delta
    if at_inf > value:
        value, worst = at_inf, INF
    return Check(value, worst, value <= FEASIBILITY_TOL)


def verify_cr(f: PurchaseDistribution, config: ProblemConfig, bound: float) -> Check:
    """Largest excess of the expected ratio over ``bound``.

    Checking grid points and infinity suffices: between atoms and past the
    last atom the expected ratio is monotone.
    """
    xs = check_points(f, config)
    excess = expected_cr_profile(f, xs, config.a) - bound
    i = int(np.argmax(excess))
    value, worst = float(excess[i]), float(xs[i])
    at_inf = cr_at_infinity(f, config.a) - bound
    if at_inf > value:
        value, worst = at_inf, INF
    return Check(value, worst, value <= CR_TOL)


@dataclass(frozen=True)
class ExpSegment:
    start: float
    end: float
    base: float

    def to_dict(self) -> dict[str, float]:
        return {"start": self.start, "end": self.end, "base": self.base}


@dataclass(frozen=True)
class ZeroIntervalCheck:
    """Ratio across a run of zero masses, from the last atom before it."""

    start: float
    end: float
    expected: str  # "decreasing" or "flat"
    drift: float  # c - a E, the sign of the ratio's slope
    change: float  # ratio at end minus ratio at start
    passed: bool


def exponential_segments(
    masses: NDArray[np.float64], tau: float, start_index: int, tol: float = EXP_TOL
) -> list[ExpSegment]:
    """Runs of at least three atoms after ``start_index`` growing by ``1 + tau``."""
    m = np.asarray(masses, dtype=float)
    growth = 1.0 + tau
    segments = []
    i = start_index
    n = m.size
    while i < n - 1:
        j = i
        while j < n - 1 and m[j] > 0 and abs(m[j + 1] / m[j] - growth) <= tol * growth:
            j += 1
        if j - i >= 2:
            run = m[i : j + 1]
            slope = np.polyfit(np.arange(run.size), np.log(run), 1)[0]
            segments.append(ExpSegment((i + 1) * tau, (j + 1) * tau, float(math.exp(slope))))
            i = j
        else:
            i += 1
    return segments


def zero_interval_checks(
    f: PurchaseDistribution, config: ProblemConfig, world: World, end_index: int
) -> list[ZeroIntervalCheck]:
    """Monotonicity of the ratio over each maximal zero run up to ``end_index``.

    Runs inside [0, 1] must be strictly decreasing. After 1 the ratio is flat
    in world 1 and decreasing in world 2.
    """
    a, tau = config.a, config.tau
    m = f.padded(end_index)
    sums = PrefixSums.of(tau, m)
    k_one = config.k_one
    checks = []
    k = 0
    while k < end_index:
        if m[k] != 0.0:
            k += 1
            continue
        j = k
        while j < end_index and m[j] == 0.0:
            j += 1
        # Atoms k+1..j (1-based) are zero; the ratio is smooth on [k tau, j tau].
        x0, x1 = max(k, 1) * tau, j * tau
        k = j
        if x1 <= x0:
            continue
        e = sums.s1[j]
        c = 1.0 - sums.s0[j]
        xs = np.array([x0, x1])
        cr = expected_cr_profile(f, xs, a, tol=1.0)
        change = float(cr[1] - cr[0])
        tol = MONOTONE_TOL * (x1 - x0)
        if x1 <= 1.0 + TIME_TOL:
            expected, ok = "decreasing", change < 0.0
            drift = float("nan")
        elif x0 < 1.0 - TIME_TOL:
            continue  # straddles 1, where the ratio formula changes
        else:
            drift = c - a * e
            if world is World.WORLD1:
                expected, ok = "flat", abs(change) <= tol
            else:
                expected, ok = "decreasing", change <= tol and drift < 0.0
        checks.append(ZeroIntervalCheck(x0, x1, expected, drift, change, bool(ok)))
    return checks


@dataclass(frozen=True)
class StructureReport:
    world: World
    times: NDArray[np.float64]
    tight_map: list[Tightness]
    cr_slack: NDArray[np.float64]
    mass_slack: NDArray[np.float64]
    p: float | None
    suffix_mass: float
    exp_segments: list[ExpSegment]
    zero_interval_monotonicity: list[ZeroIntervalCheck]
    max_cr: float
    max_mass_violation: float
    passed: bool
    ambiguous: list[float] = field(default_factory=list)

    def prefix_tight(self, until: float = 1.0) -> bool:
        """True if no grid point in (0, until] is classified as neither."""
        return all(
            tag is not Tightness.NEITHER
            for x, tag in zip(self.times, self.tight_map)
            if x <= until + TIME_TOL
        )

    def to_dict(self) -> dict[str, Any]:
        counts = {tag.value: 0 for tag in Tightness}
        for tag in self.tight_map:
            counts[tag.value] += 1
        return {
            "pass": self.passed,
            "max_cr": self.max_cr,
            "max_mass_violation": self.max_mass_violation,
            "world": int(self.world),
            "p": self.p,
            "suffix_mass": self.suffix_mass,
            "segments": [s.to_dict() for s in self.exp_segments],
            "tightness_counts": counts,
            "zero_intervals_failed": sum(not z.passed for z in self.zero_interval_monotonicity),
            "ambiguous_points": len(self.ambiguous),
        }


def structure_report(
    f: PurchaseDistribution, config: ProblemConfig, opt: float
) -> StructureReport:
    """Tightness map and structural diagnostics of ``f`` against ``opt``."""
    a, tau = config.a, config.tau
    end_index = max(f.count, config.k_lb)
    xs = tau * np.arange(1, end_index + 1, dtype=float)
    cr = expected_cr_profile(f, xs, a)
    cr_slack = opt - cr
    if config.tail_active:
        mass_slack = config.delta - bad_mass_profile(f, xs, a, config.gamma)
    else:
        mass_slack = np.full(xs.size, np.inf)

    tight_map = []
    for cs, ms in zip(cr_slack, mass_slack):
        if abs(cs) <= TIGHT_TOL:
            tight_map.append(Tightness.CR_TIGHT)
        elif abs(ms) <= TIGHT_TOL:
            tight_map.append(Tightness.MASS_TIGHT)
        else:
            tight_map.append(Tightness.NEITHER)

    k_one, k_lb = config.k_one, config.k_lb
    after_one = np.flatnonzero(np.abs(mass_slack[k_one:]) <= TIGHT_TOL)
    p = float(xs[k_one + after_one[0]]) if after_one.size else None
    ambiguous = []
    if p is not None:
        ambiguous = [
            float(x) for x, tag in zip(xs, tight_map) if p < x <= config.bounds.lb + TIME_TOL
            and tag is Tightness.NEITHER
        ]

    world = world_check(f.padded(k_one), opt, config)
    suffix_mass = math.fsum(f.masses[k_lb:]) + f.mass_inf
    feas = verify_feasibility(f, config)
    crc = verify_cr(f, config, opt)
    return StructureReport(
        world=world,
        times=xs,
        tight_map=tight_map,
        cr_slack=cr_slack,
        mass_slack=mass_slack,
        p=p,
        suffix_mass=suffix_mass,
        exp_segments=exponential_segments(f.padded(end_index), tau, k_one),
        zero_interval_monotonicity=zero_interval_checks(f, config, world, end_index),
        max_cr=crc.value + opt,
        max_mass_violation=feas.value,
        passed=feas.passed and crc.passed,
        ambiguous=ambiguous,
    )


@dataclass(frozen=True)
class SolverComparison:
    binsearch: SolveResult
    lp: SolveResult
    objective_gap: float  # binary-search estimate minus lambda*
    prefix_sup_norm: float  # over [0, 1]
    tail_sup_norm: float  # over (1, end of support]
    disagreement: tuple[float, float] | None  # first and last x > 1 differing by > 1e-6

    def to_dict(self) -> dict[str, Any]:
        return {
            "binsearch_opt": self.binsearch.opt_estimate,
            "lp_opt": self.lp.opt_estimate,
            "objective_gap": self.objective_gap,
            "prefix_sup_norm": self.prefix_sup_norm,
            "tail_sup_norm": self.tail_sup_norm,
            "disagreement": list(self.disagreement) if self.disagreement else None,
        }


def compare_solvers(config: ProblemConfig, backend: Backend = "auto") -> SolverComparison:
    """Run both solvers on the same grid and measure how far apart they are."""
    bs = binary_search(config)
    lp = solve_lp(build_lp(config), backend)
    n = max(bs.distribution.count, lp.distribution.count)
    diff = np.abs(bs.distribution.padded(n) - lp.distribution.padded(n))
    k_one = config.k_one
    tail = diff[k_one:]
    far = np.flatnonzero(tail > TIGHT_TOL)
    disagreement = None
    if far.size:
        disagreement = (float((k_one + far[0] + 1) * config.tau), float((k_one + far[-1] + 1) * config.tau))
    return SolverComparison(
        binsearch=bs,
        lp=lp,
        objective_gap=bs.opt_estimate - lp.opt_estimate,
        prefix_sup_norm=float(diff[:k_one].max()) if k_one else 0.0,
        tail_sup_norm=float(tail.max()) if tail.size else 0.0,
        disagreement=disagreement,
    )
