"""Optimal randomized strategies for two-slope ski rental with a tail-risk constraint."""

from tailski.badinterval import BadInterval, Kind, bad_interval, mass_in
from tailski.binsearch import SolveResult, binary_search, classical_ratio, truncate
from tailski.greedy import (
    PartialDistribution,
    Termination,
    World,
    alg_subroutine,
    greedy_with_opt,
    world_check,
)
from tailski.lp import LPInstance, build_lp, lp_solver_backend, solve_lp
from tailski.model import (
    ConfigError,
    ProblemConfig,
    PurchaseDistribution,
    RegimeBoundaries,
    SolverError,
    boundaries,
    regime_threshold,
)
from tailski.ratio import alpha, expected_cr, partial_cr, sup_expected_cr
from tailski.verify import (
    StructureReport,
    compare_solvers,
    structure_report,
    verify_cr,
    verify_feasibility,
)

__all__ = [
    "BadInterval",
    "ConfigError",
    "Kind",
    "LPInstance",
    "PartialDistribution",
    "ProblemConfig",
    "PurchaseDistribution",
    "RegimeBoundaries",
    "SolveResult",
    "SolverError",
    "StructureReport",
    "Termination",
    "World",
    "alg_subroutine",
    "alpha",
    "bad_interval",
    "binary_search",
    "boundaries",
    "build_lp",
    "classical_ratio",
    "compare_solvers",
    "expected_cr",
    "greedy_with_opt",
    "lp_solver_backend",
    "mass_in",
    "partial_cr",
    "regime_threshold",
    "solve_lp",
    "structure_report",
    "sup_expected_cr",
    "truncate",
    "verify_cr",
    "verify_feasibility",
    "world_check",
]
