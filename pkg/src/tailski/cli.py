"""Command-line front end: solve, verify, sweep and export.

Exit codes: 0 ok, 1 verification failure, 2 configuration error, 3 solver error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from tailski.badinterval import bad_interval, bad_mass_profile, mass_in
from tailski.binsearch import SolveResult, binary_search
from tailski.lp import build_lp, solve_lp
from tailski.model import X_MAX_ENV, ConfigError, ProblemConfig, PurchaseDistribution, SolverError
from tailski.ratio import NormalizationError, cr_at_infinity, expected_cr_profile
from tailski.verify import check_points, structure_report, verify_cr, verify_feasibility

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
FORMAT = "tailski-solution/1"
NORMALIZATION_TOL = 1e-9


def _jsonable(value: Any) -> Any:
    """Plain JSON types; infinities become the string "inf"."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


@dataclass(frozen=True)
class SolutionFile:
    """On-disk form of a solve. Floats are written with ``repr`` and read back exactly."""

    config: ProblemConfig
    masses: np.ndarray
    mass_inf: float
    opt: float
    world: int
    solver: str
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def distribution(self) -> PurchaseDistribution:
        return PurchaseDistribution(self.config.tau, self.masses, self.mass_inf)

    @classmethod
    def from_result(cls, result: SolveResult) -> SolutionFile:
        diagnostics = dict(result.diagnostics)
        diagnostics.update(iterations=result.iterations, bracket=list(result.bracket))
        return cls(
            config=result.config,
            masses=np.asarray(result.distribution.masses),
            mass_inf=result.distribution.mass_inf,
            opt=result.opt_estimate,
            world=int(result.world),
            solver=result.solver,
            diagnostics=diagnostics,
        )

    def to_dict(self) -> dict[str, Any]:
        return _jsonable({
            "format": FORMAT,
            "config": self.config.to_dict(),
            "grid": {"tau": self.config.tau, "count": int(self.masses.size)},
            "masses": [float(m) for m in self.masses],
            "mass_inf": self.mass_inf,
            "opt": self.opt,
            "world": self.world,
            "solver": self.solver,
            "diagnostics": self.diagnostics,
        })

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SolutionFile:
        if data.get("format") != FORMAT:
            raise ConfigError(f"not a solution file (format={data.get('format')!r})")
        config = ProblemConfig.from_dict(data["config"])
        masses = np.array(data["masses"], dtype=float)
        grid = data["grid"]
        if int(grid["count"]) != masses.size or float(grid["tau"]) != config.tau:
            raise ConfigError("grid block does not match the mass vector")
        return cls(
            config=config,
            masses=masses,
            mass_inf=float(data["mass_inf"]),
            opt=float(data["opt"]),
            world=int(data["world"]),
            solver=str(data["solver"]),
            diagnostics=dict(data.get("diagnostics", {})),
        )

    @classmethod
    def load(cls, path: str | os.PathLike[str]) -> SolutionFile:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read solution file {path}: {exc}") from exc
        try:
            return cls.from_dict(data)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed solution file {path}: {exc!r}") from exc


def _x_max_override() -> float | None:
    raw = os.environ.get(X_MAX_ENV)
    if not raw:
        return None
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{X_MAX_ENV}={raw!r} is not a number") from exc


def _config(args: argparse.Namespace, **overrides: float) -> ProblemConfig:
    values = {
        "a": args.a,
        "gamma": args.gamma,
        "delta": args.delta,
        "tau": args.tau,
        "epsilon": args.epsilon,
        "x_max": _x_max_override(),
    }
    values.update(overrides)
    return ProblemConfig(**values)


def _solve(config: ProblemConfig, solver: str, backend: str) -> SolveResult:
    if solver == "binsearch":
        return binary_search(config)
    return solve_lp(build_lp(config), backend)


def _summary(result: SolveResult) -> str:
    return (
        f"solver={result.solver} opt={result.opt_estimate!r} world={int(result.world)} "
        f"mass_inf={result.distribution.mass_inf!r} support={result.distribution.count}"
    )


def _with_suffix(path: Path, tag: str) -> Path:
    return path.with_name(f"{path.stem}.{tag}{path.suffix or '.json'}")


def cmd_solve(args: argparse.Namespace) -> int:
    config = _config(args)
    out = Path(args.out)
    solvers = ["binsearch", "lp"] if args.solver == "both" else [args.solver]
    results = {}
    for name in solvers:
        result = _solve(config, name, args.backend)
        path = _with_suffix(out, name) if len(solvers) > 1 else out
        path.write_text(SolutionFile.from_result(result).dumps())
        results[name] = result
        print(f"{_summary(result)} file={path}")
    if len(results) == 2:
        bs, lp = results["binsearch"], results["lp"]
        k_one = config.k_one
        prefix = float(np.abs(bs.distribution.padded(k_one) - lp.distribution.padded(k_one)).max())
        gap = bs.opt_estimate - lp.opt_estimate
        print(f"gap={gap!r} prefix_sup_norm={prefix!r} within_epsilon={gap <= config.epsilon}")
    return EXIT_OK


def verify_solution(solution: SolutionFile) -> dict[str, Any]:
    """Checks a loaded solution; the result has a boolean ``pass`` field.

    Bad-interval masses are checked even when the file is not normalized;
    the ratio and structure checks need a probability distribution.
    """
    config = solution.config
    f = solution.distribution
    total = f.total
    errors = []
    feas = verify_feasibility(f, config)
    report: dict[str, Any] = {
        "total_mass": total,
        "max_mass_violation": feas.value,
        "worst_mass_x": feas.worst_x,
    }
    if abs(total - 1.0) > NORMALIZATION_TOL or np.any(solution.masses < 0) or f.mass_inf < 0:
        errors.append("normalization")
    else:
        crc = verify_cr(f, config, solution.opt)
        report.update(structure_report(f, config, solution.opt).to_dict())
        report.update(max_cr_excess=crc.value, worst_cr_x=crc.worst_x)
        if not crc.passed:
            errors.append("cr_violation")
    report["max_mass_violation"] = feas.value
    if not feas.passed:
        errors.append("mass_violation")
    report["errors"] = errors
    report["pass"] = not errors
    return _jsonable(report)


def cmd_verify(args: argparse.Namespace) -> int:
    report = verify_solution(SolutionFile.load(args.solution))
    print(json.dumps(report, indent=1, sort_keys=True))
    return EXIT_OK if report["pass"] else EXIT_VERIFY


def _sweep_values(start: float, stop: float, steps: int) -> list[float]:
    if steps < 1:
        raise ConfigError("--steps must be at least 1")
    return [float(v) for v in np.linspace(start, stop, steps)]


def sweep_rows(args: argparse.Namespace) -> list[tuple[float, float, int, float]]:
    rows = []
    for value in _sweep_values(args.start, args.stop, args.steps):
        config = _config(args, **{args.param: value})
        result = _solve(config, args.solver, args.backend)
        f = result.distribution
        suffix = math.fsum(f.masses[config.k_lb:]) + f.mass_inf
        rows.append((value, result.opt_estimate, int(result.world), suffix))
    return rows


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def cmd_sweep(args: argparse.Namespace) -> int:
    rows = sweep_rows(args)
    handle, close = _open_out(args.out)
    try:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([args.param, "opt", "world", "suffix_mass"])
        for value, opt, world, suffix in rows:
            writer.writerow([f"{value:.17g}", f"{opt:.17g}", world, f"{suffix:.17g}"])
    finally:
        if close:
            handle.close()
    return EXIT_OK


def export_rows(solution: SolutionFile) -> list[tuple[str, str, str, str]]:
    """Rows ``t, f, cr, badmass`` for every grid point, then infinity.

    The grid runs past the support to the points the verifier checks, so the
    bad-mass column reaches the suffix-shaped intervals beyond L5.
    """
    config = solution.config
    f = solution.distribution
    a, gamma = config.a, config.gamma
    xs = check_points(f, config)
    cr = expected_cr_profile(f, xs, a)
    bad = bad_mass_profile(f, xs, a, gamma)
    rows = [
        (f"{x:.17g}", f"{m:.17g}", f"{c:.17g}", f"{b:.17g}")
        for x, m, c, b in zip(xs, f.padded(xs.size), cr, bad)
    ]
    inf_bad = mass_in(f, bad_interval(math.inf, a, gamma))
    rows.append(("inf", f"{f.mass_inf:.17g}", f"{cr_at_infinity(f, a):.17g}", f"{inf_bad:.17g}"))
    return rows


def cmd_export(args: argparse.Namespace) -> int:
    solution = SolutionFile.load(args.solution)
    try:
        rows = export_rows(solution)
    except NormalizationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    handle, close = _open_out(args.out)
    try:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["t", "f", "cr", "badmass"])
        writer.writerows(rows)
    finally:
        if close:
            handle.close()
    return EXIT_OK


def _add_problem_flags(p: argparse.ArgumentParser, with_delta: bool = True) -> None:
    p.add_argument("--a", type=float, required=True, help="slope after buying, in (0, 1)")
    p.add_argument("--gamma", type=float, required=True, help="tail threshold on the ratio")
    if with_delta:
        p.add_argument("--delta", type=float, required=True, help="allowed tail probability")
    p.add_argument("--tau", type=float, default=1e-3, help="grid step (default 1e-3)")
    p.add_argument("--epsilon", type=float, default=1e-6, help="bisection accuracy")
    p.add_argument("--backend", choices=["auto", "simplex", "highs"], default="auto",
                   help="LP backend (default: simplex for small grids, else HiGHS)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tailski",
        description="Optimal randomized two-slope ski rental under a tail-risk constraint.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one configuration")
    _add_problem_flags(p)
    p.add_argument("--solver", choices=["binsearch", "lp", "both"], default="binsearch")
    p.add_argument("--out", default="solution.json",
                   help="output path; with --solver both, .binsearch/.lp is inserted")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="check a solution file")
    p.add_argument("--solution", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="solve across a range of delta or gamma")
    _add_problem_flags(p, with_delta=False)
    p.add_argument("--delta", type=float, default=1.0, help="fixed delta for a gamma sweep")
    p.add_argument("--param", choices=["delta", "gamma"], default="delta")
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--solver", choices=["binsearch", "lp"], default="binsearch")
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export", help="write plot data for a solution file")
    p.add_argument("--solution", required=True)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
