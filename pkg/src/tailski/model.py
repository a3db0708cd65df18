"""Problem configuration, regime boundaries and the discrete time grid."""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

INF = math.inf

# Time comparisons against closed-form boundaries.
TIME_TOL = 1e-9
# Relative slack for "B / tau is an integer".
ALIGN_TOL = 1e-9
# Tolerance on the T-CR equality that separates world 1 from world 2.
WORLD_TOL = 1e-8

X_MAX_ENV = "TAILSKI_X_MAX"


class ConfigError(ValueError):
    """Invalid parameters or a grid that does not resolve the boundaries."""


class SolverError(RuntimeError):
    """A solver could not produce a distribution."""


@dataclass(frozen=True)
class RegimeBoundaries:
    """Thresholds that split the stopping-time axis into BI1..BI5.

    ``b1`` ends the prefix-shaped intervals, ``[l3, i3]`` is the stretch with
    empty bad intervals, ``lb`` is the last time outside every suffix-shaped
    interval and ``l5`` is where suffix-shaped intervals start.
    """

    b1: float
    l3: float
    i3: float
    lb: float
    l5: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def _check_slope(a: float) -> None:
    if not (0.0 <= a < 1.0) or math.isnan(a):
        raise ConfigError(f"slope a must lie in [0, 1), got {a!r}")


def check_regime(a: float, gamma: float) -> None:
    _check_slope(a)
    if gamma < 2.0 - a - 1e-12:
        raise ConfigError(f"gamma={gamma!r} is below 2 - a = {2.0 - a!r}")
    if a * gamma >= 1.0:
        raise ConfigError(
            f"gamma={gamma!r} must be below 1/a = {1.0 / a if a else INF!r}"
        )


def boundaries(a: float, gamma: float) -> RegimeBoundaries:
    """Closed-form regime boundaries for ``2 - a <= gamma < 1/a``."""
    check_regime(a, gamma)
    one_minus_ag = 1.0 - a * gamma
    return RegimeBoundaries(
        b1=(1.0 - a) / (gamma - a),
        l3=(1.0 - a) / (gamma - 1.0),
        i3=(gamma - 1.0) * (1.0 - a) / one_minus_ag,
        lb=(gamma - 1.0) / one_minus_ag,
        l5=gamma * (1.0 - a) / one_minus_ag,
    )


def regime_threshold(a: float, opt: float) -> float:
    """Smallest delta for which the optimum keeps zero mass after time 1.

    Returns ``(opt - 1) / (1/a - 1)``. Undefined for the pure-buy case a = 0.
    """
    if a <= 0.0:
        raise ConfigError("regime threshold is undefined for a = 0 (pure buy)")
    _check_slope(a)
    if opt < 1.0:
        raise ConfigError(f"opt must be >= 1, got {opt!r}")
    return (opt - 1.0) / (1.0 / a - 1.0)


def _is_aligned(value: float, tau: float) -> bool:
    q = value / tau
    return abs(q - round(q)) <= ALIGN_TOL * max(1.0, abs(q))


def default_x_max(bounds: RegimeBoundaries) -> float:
    # Past l5, a CR-tight run seeded by a mass as small as WORLD_TOL needs
    # about ln(1/WORLD_TOL) time units of (1+tau)-growth to reach unit mass.
    return bounds.l5 + 2.0 + math.log(1.0 / WORLD_TOL)


@dataclass(frozen=True)
class ProblemConfig:
    """Inputs of one solve: slope, tail constraint, grid step and accuracy.

    Construction validates the solver regime ``2 - a <= gamma < 1/a`` with
    ``a > 0`` and checks that every critical boundary sits on the grid.
    When ``delta >= 1`` the tail constraint is vacuous and only the
    boundaries at or below 1 have to be aligned.
    """

    a: float
    gamma: float
    delta: float
    tau: float = 1e-3
    epsilon: float = 1e-6
    x_max: float | None = None
    bounds: RegimeBoundaries = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.a == 0.0:
            raise ConfigError("a = 0 (pure buy) is not supported by the solvers")
        check_regime(self.a, self.gamma)
        if not (0.0 <= self.delta <= 1.0):
            raise ConfigError(f"delta must lie in [0, 1], got {self.delta!r}")
        if not (self.tau > 0.0) or not math.isfinite(self.tau):
            raise ConfigError(f"tau must be positive, got {self.tau!r}")
        if not (self.epsilon > 0.0):
            raise ConfigError(f"epsilon must be positive, got {self.epsilon!r}")
        bounds = boundaries(self.a, self.gamma)
        object.__setattr__(self, "bounds", bounds)
        for name, value in self.critical_points().items():
            if not _is_aligned(value, self.tau):
                raise ConfigError(
                    f"boundary {name}={value:.12g} is not a multiple of "
                    f"tau={self.tau!r} ({value / self.tau:.9g} steps)"
                )
        if self.x_max is not None and self.x_max < bounds.lb:
            raise ConfigError(f"x_max={self.x_max!r} is below L_b={bounds.lb!r}")

    def critical_points(self) -> dict[str, float]:
        b = self.bounds
        points = {"b1": b.b1, "l3": b.l3, "one": 1.0, "i3": b.i3}
        if self.delta < 1.0:
            points.update(lb=b.lb, l5=b.l5)
        return points

    @property
    def tail_active(self) -> bool:
        return self.delta < 1.0

    def index_of(self, t: float) -> int:
        """Grid index of an aligned time (time = index * tau)."""
        return int(round(t / self.tau))

    @property
    def k_one(self) -> int:
        return self.index_of(1.0)

    @property
    def k_lb(self) -> int:
        """Number of grid points in (0, L_b]."""
        q = self.bounds.lb / self.tau
        k = int(round(q))
        if abs(q - k) <= ALIGN_TOL * max(1.0, q):
            return k
        return int(math.floor(q))

    @property
    def resolved_x_max(self) -> float:
        x_max = self.x_max if self.x_max is not None else default_x_max(self.bounds)
        return math.ceil(x_max / self.tau - ALIGN_TOL) * self.tau

    def to_dict(self) -> dict[str, Any]:
        return {
            "a": self.a,
            "gamma": self.gamma,
            "delta": self.delta,
            "tau": self.tau,
            "epsilon": self.epsilon,
            "x_max": self.x_max,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ProblemConfig:
        unknown = set(data) - {"a", "gamma", "delta", "tau", "epsilon", "x_max"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            kwargs = {k: (None if v is None else float(v)) for k, v in data.items()}
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path: str | os.PathLike[str]) -> ProblemConfig:
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class TimeGrid:
    """Points ``tau, 2 tau, ..., count * tau`` plus an infinity slot."""

    tau: float
    count: int

    def time(self, k: int) -> float:
        if k < 1 or k > self.count:
            raise IndexError(f"grid index {k} outside 1..{self.count}")
        return k * self.tau

    def index(self, t: float) -> int:
        k = int(round(t / self.tau))
        if not _is_aligned(t, self.tau) or not (1 <= k <= self.count):
            raise ConfigError(f"time {t!r} is not a point of this grid")
        return k

    @property
    def times(self) -> NDArray[np.float64]:
        return self.tau * np.arange(1, self.count + 1, dtype=float)

    @property
    def end(self) -> float:
        return self.count * self.tau


def build_grid(config: ProblemConfig, support_end: float) -> TimeGrid:
    """Grid covering ``(0, support_end]`` at the configured step."""
    if support_end < config.bounds.lb - TIME_TOL and config.tail_active:
        raise ConfigError(
            f"support_end={support_end!r} does not reach L_b={config.bounds.lb!r}"
        )
    if not _is_aligned(support_end, config.tau):
        if config.tail_active:
            raise ConfigError(
                f"support_end={support_end!r} is not a multiple of tau={config.tau!r}"
            )
        count = int(math.ceil(support_end / config.tau))
    else:
        count = int(round(support_end / config.tau))
    return TimeGrid(tau=config.tau, count=count)


@dataclass(frozen=True)
class PurchaseDistribution:
    """Buy-time distribution on ``tau, 2 tau, ...`` plus mass at infinity.

    ``masses[i]`` is the probability of switching at time ``(i + 1) * tau``.
    """

    tau: float
    masses: NDArray[np.float64]
    mass_inf: float = 0.0

    def __post_init__(self) -> None:
        arr = np.array(self.masses, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "masses", arr)
        object.__setattr__(self, "mass_inf", float(self.mass_inf))

    @property
    def count(self) -> int:
        return int(self.masses.size)

    @property
    def times(self) -> NDArray[np.float64]:
        return self.tau * np.arange(1, self.count + 1, dtype=float)

    @property
    def total(self) -> float:
        return math.fsum(self.masses) + self.mass_inf

    def padded(self, count: int) -> NDArray[np.float64]:
        """Finite masses zero-extended (or cut) to ``count`` grid points."""
        out = np.zeros(count)
        n = min(count, self.count)
        out[:n] = self.masses[:n]
        return out

    @classmethod
    def point_mass(cls, tau: float, t: float, count: int | None = None) -> PurchaseDistribution:
        if math.isinf(t):
            return cls(tau, np.zeros(count or 0), 1.0)
        k = int(round(t / tau))
        masses = np.zeros(max(k, count or 0))
        masses[k - 1] = 1.0
        return cls(tau, masses, 0.0)
