"""Bad intervals: buy times whose ratio against a stopping time exceeds gamma.

Every interval is open on the left and closed on the right, ``(left, right]``.
Suffix-shaped intervals also contain infinity.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from tailski.model import INF, TIME_TOL, PurchaseDistribution


class Kind(enum.Enum):
    EMPTY = "empty"
    BOUNDED = "bounded"
    SUFFIX = "suffix"
    INFINITY_ONLY = "infinity_only"


@dataclass(frozen=True)
class BadInterval:
    kind: Kind
    left: float | None = None
    right: float | None = None

    @property
    def is_empty(self) -> bool:
        return self.kind is Kind.EMPTY

    @property
    def includes_infinity(self) -> bool:
        return self.kind in (Kind.SUFFIX, Kind.INFINITY_ONLY)

    def contains(self, t: float) -> bool:
        if self.kind is Kind.EMPTY:
            return False
        if math.isinf(t):
            return self.includes_infinity
        if self.kind is Kind.INFINITY_ONLY:
            return False
        if t <= self.left:
            return False
        return self.kind is Kind.SUFFIX or t <= self.right


EMPTY = BadInterval(Kind.EMPTY)
INFINITY_ONLY = BadInterval(Kind.INFINITY_ONLY)


@dataclass(frozen=True)
class _Shape:
    """Boundaries valid for any gamma >= 2 - a (i3/l5 are inf when a*gamma >= 1)."""

    b1: float
    l3: float
    i3: float
    l5: float
    slope2: float  # BI2 left endpoint: slope2 * x - 1
    slope4: float  # BI4/BI5 left endpoint: slope4 * x + (gamma - 1)
    shift4: float


def _shape(a: float, gamma: float) -> _Shape:
    if not (0.0 <= a < 1.0):
        raise ValueError(f"slope a must lie in [0, 1), got {a!r}")
    if gamma < 2.0 - a - 1e-12:
        raise ValueError(f"gamma={gamma!r} is below 2 - a")
    b1 = (1.0 - a) / (gamma - a)
    l3 = (1.0 - a) / (gamma - 1.0)
    if a * gamma < 1.0:
        i3 = (gamma - 1.0) * (1.0 - a) / (1.0 - a * gamma)
        l5 = gamma * (1.0 - a) / (1.0 - a * gamma)
    else:
        i3 = l5 = INF
    return _Shape(
        b1=b1,
        l3=l3,
        i3=i3,
        l5=l5,
        slope2=(gamma - a) / (1.0 - a),
        slope4=(gamma - 1.0) * a / (1.0 - a),
        shift4=gamma - 1.0,
    )


def bad_interval(x: float, a: float, gamma: float) -> BadInterval:
    """The set of buy times t with ratio(t, x) > gamma.

    Covers both gamma >= 1/a (bad intervals vanish after l3) and
    2 - a <= gamma < 1/a (five regimes BI1..BI5).
    """
    if math.isnan(x) or x < 0.0:
        raise ValueError(f"stopping time must be >= 0, got {x!r}")
    if math.isinf(x):
        return INFINITY_ONLY
    s = _shape(a, gamma)
    if x <= s.b1 + TIME_TOL:
        left = 0.0
    elif x < s.l3 - TIME_TOL:
        left = s.slope2 * x - 1.0
    elif x <= s.i3 + TIME_TOL:
        return EMPTY
    elif x <= s.l5 + TIME_TOL:
        left = s.slope4 * x + s.shift4
    else:
        return BadInterval(Kind.SUFFIX, s.slope4 * x + s.shift4, INF)
    if left >= x - TIME_TOL:
        return EMPTY
    return BadInterval(Kind.BOUNDED, left, x)


def bad_interval_bounds(
    xs: NDArray[np.float64], a: float, gamma: float
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.bool_]]:
    """Vectorised ``bad_interval`` for finite stopping times.

    Returns ``(left, right, suffix)``; empty intervals come back with
    ``left == right`` and suffix intervals with ``right == inf``.
    """
    xs = np.asarray(xs, dtype=float)
    s = _shape(a, gamma)
    left = np.full_like(xs, np.nan)
    right = xs.copy()
    suffix = np.zeros(xs.shape, dtype=bool)

    bi1 = xs <= s.b1 + TIME_TOL
    bi2 = ~bi1 & (xs < s.l3 - TIME_TOL)
    bi3 = ~bi1 & ~bi2 & (xs <= s.i3 + TIME_TOL)
    bi4 = ~bi1 & ~bi2 & ~bi3 & (xs <= s.l5 + TIME_TOL)
    bi5 = ~(bi1 | bi2 | bi3 | bi4)

    left[bi1] = 0.0
    left[bi2] = s.slope2 * xs[bi2] - 1.0
    left[bi3] = xs[bi3]
    left[bi4 | bi5] = s.slope4 * xs[bi4 | bi5] + s.shift4
    right[bi5] = INF
    suffix[bi5] = True

    degenerate = ~suffix & (left >= xs - TIME_TOL)
    left[degenerate] = xs[degenerate]
    right[degenerate] = xs[degenerate]
    return left, right, suffix


def grid_span(left: float, right: float, tau: float, count: int) -> tuple[int, int]:
    """Grid indices ``(lo, hi)`` such that points ``lo+1..hi`` lie in (left, right].

    Indices are clipped to ``0..count``; ``lo >= hi`` means no grid point.
    """
    edge = tau * 1e-6
    lo = int(math.floor((left + edge) / tau))
    hi = count if math.isinf(right) else int(math.floor((right + edge) / tau))
    lo = min(max(lo, 0), count)
    hi = min(max(hi, 0), count)
    return lo, hi


def mass_in(f: PurchaseDistribution, iv: BadInterval) -> float:
    """Total probability that ``f`` places inside ``iv``."""
    if iv.kind is Kind.EMPTY:
        return 0.0
    if iv.kind is Kind.INFINITY_ONLY:
        return f.mass_inf
    lo, hi = grid_span(iv.left, iv.right, f.tau, f.count)
    finite = math.fsum(f.masses[lo:hi]) if hi > lo else 0.0
    if iv.kind is Kind.SUFFIX:
        finite += f.mass_inf
    return finite


def bad_mass_profile(
    f: PurchaseDistribution, xs: NDArray[np.float64], a: float, gamma: float
) -> NDArray[np.float64]:
    """``mass_in(f, bad_interval(x))`` for every finite x in ``xs``."""
    xs = np.asarray(xs, dtype=float)
    left, right, suffix = bad_interval_bounds(xs, a, gamma)
    cum = np.concatenate(([0.0], np.cumsum(f.masses)))
    edge = f.tau * 1e-6
    lo = np.clip(np.floor((left + edge) / f.tau), 0, f.count).astype(np.int64)
    finite_right = np.where(suffix, 0.0, right)
    hi = np.where(
        suffix, f.count, np.clip(np.floor((finite_right + edge) / f.tau), 0, f.count)
    ).astype(np.int64)
    hi = np.maximum(hi, lo)
    out = cum[hi] - cum[lo]
    out[suffix] += f.mass_inf
    return out
