"""Competitive ratios: pointwise, in expectation, and the T-CR of a partial mass."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from tailski.model import INF, PurchaseDistribution

TOL_MASS = 1e-9


class NormalizationError(ValueError):
    pass


def alpha(t: float, x: float, a: float) -> float:
    """Ratio of algorithm cost to offline cost when buying at t and stopping at x.

    ``x = 0`` is treated as the limit x -> 0+, where nothing has been paid
    yet by either side and the ratio is 1 for any t > 0.
    """
    if t < 0 or x < 0:
        raise ValueError("times must be nonnegative")
    if math.isinf(x):
        return 1.0 / a if math.isinf(t) else 1.0
    if x == 0.0:
        return 1.0
    if x <= 1.0:
        if t <= x:
            return (t + 1.0 - a + a * (x - t)) / x
        return 1.0
    denom = 1.0 - a + a * x
    if t <= x:
        return (t + 1.0 - a + a * (x - t)) / denom
    return x / denom


@dataclass(frozen=True)
class PrefixSums:
    """Cumulative mass and first moment over the grid.

    ``s0[k]`` is the mass on the first k grid points and ``s1[k]`` the
    matching sum of ``t * f_t``; index 0 holds the empty prefix.
    """

    tau: float
    s0: NDArray[np.float64]
    s1: NDArray[np.float64]

    @classmethod
    def of(cls, tau: float, masses: NDArray[np.float64]) -> PrefixSums:
        masses = np.asarray(masses, dtype=float)
        times = tau * np.arange(1, masses.size + 1, dtype=float)
        s0 = np.concatenate(([0.0], np.cumsum(masses)))
        s1 = np.concatenate(([0.0], np.cumsum(times * masses)))
        return cls(tau, s0, s1)

    def upto(self, xs: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Sums over grid points t <= x, for each x."""
        n = self.s0.size - 1
        k = np.floor(np.asarray(xs, dtype=float) / self.tau + 1e-6).astype(np.int64)
        k = np.clip(k, 0, n)
        return self.s0[k], self.s1[k]


def _check_normalized(f: PurchaseDistribution, tol: float) -> None:
    total = f.total
    if abs(total - 1.0) > tol:
        raise NormalizationError(f"distribution sums to {total!r}, not 1")


def _cr_from_sums(
    xs: NDArray[np.float64], p0: NDArray[np.float64], p1: NDArray[np.float64], a: float
) -> NDArray[np.float64]:
    # Mass not yet bought by x (later grid points and infinity) is 1 - p0.
    small = xs <= 1.0
    out = np.empty_like(xs)
    xl = xs[small]
    out[small] = ((1.0 - a + a * xl) * p0[small] + (1.0 - a) * p1[small]) / xl + (
        1.0 - p0[small]
    )
    xg = xs[~small]
    d = 1.0 - a + a * xg
    out[~small] = (d * p0[~small] + (1.0 - a) * p1[~small] + xg * (1.0 - p0[~small])) / d
    return out


def cr_at_infinity(f: PurchaseDistribution, a: float) -> float:
    return 1.0 + (1.0 / a - 1.0) * f.mass_inf


def expected_cr_profile(
    f: PurchaseDistribution, xs: NDArray[np.float64], a: float, tol: float = TOL_MASS
) -> NDArray[np.float64]:
    """Expected ratio at each finite, positive stopping time in ``xs``."""
    _check_normalized(f, tol)
    xs = np.asarray(xs, dtype=float)
    if np.any(xs <= 0) or not np.all(np.isfinite(xs)):
        raise ValueError("profile points must be finite and positive")
    p0, p1 = PrefixSums.of(f.tau, f.masses).upto(xs)
    return _cr_from_sums(xs, p0, p1, a)


def expected_cr(f: PurchaseDistribution, x: float, a: float, tol: float = TOL_MASS) -> float:
    """Expected ratio of ``f`` when the adversary stops at ``x`` (may be inf)."""
    if math.isinf(x):
        _check_normalized(f, tol)
        return cr_at_infinity(f, a)
    if x == 0.0:
        _check_normalized(f, tol)
        return 1.0
    return float(expected_cr_profile(f, np.array([x]), a, tol)[0])


def partial_cr(masses: NDArray[np.float64], tau: float, x: float, a: float) -> float:
    """Left-hand side of the T-CR constraint for a mass vector of any total.

    On ``x <= 1`` unplaced mass is charged ratio 1; past 1 it is charged
    ``x / (1 - a + a x)`` only while the placed mass is below one.
    """
    masses = np.asarray(masses, dtype=float)
    k = min(int(math.floor(x / tau + 1e-6)), masses.size)
    t = tau * np.arange(1, k + 1, dtype=float)
    p0 = math.fsum(masses[:k])
    p1 = math.fsum(t * masses[:k])
    if x <= 1.0:
        return 1.0 + (1.0 - a) * ((1.0 - x) * p0 + p1) / x
    d = 1.0 - a + a * x
    return p0 + (1.0 - a) * p1 / d + x / d * max(0.0, 1.0 - p0)


def sup_expected_cr(
    f: PurchaseDistribution, a: float, tol: float = TOL_MASS
) -> tuple[float, float]:
    """Worst expected ratio over grid points and infinity, with its location.

    Between grid atoms the ratio is monotone, so checking the atoms and
    infinity is enough. Ties go to the smallest stopping time.
    """
    _check_normalized(f, tol)
    value_inf = cr_at_infinity(f, a)
    if f.count == 0:
        return value_inf, INF
    xs = f.times
    values = _cr_from_sums(xs, *PrefixSums.of(f.tau, f.masses).upto(xs), a)
    i = int(np.argmax(values))
    if values[i] >= value_inf:
        return float(values[i]), float(xs[i])
    return value_inf, INF
