import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import brute_ratio
from tailski.badinterval import (
    Kind,
    bad_interval,
    bad_interval_bounds,
    bad_mass_profile,
    grid_span,
    mass_in,
)
from tailski.model import PurchaseDistribution


def test_examples_a_half():
    assert bad_interval(1.0, 0.5, 1.5).kind is Kind.EMPTY
    iv = bad_interval(0.8, 0.5, 1.5)
    assert iv.kind is Kind.BOUNDED
    assert (iv.left, iv.right) == pytest.approx((0.6, 0.8))
    iv = bad_interval(2.0, 0.5, 1.5)
    assert iv.kind is Kind.BOUNDED
    assert (iv.left, iv.right) == pytest.approx((1.5, 2.0))
    iv = bad_interval(4.0, 0.5, 1.5)
    assert iv.kind is Kind.SUFFIX
    assert iv.left == pytest.approx(2.5) and math.isinf(iv.right)
    assert bad_interval(math.inf, 0.5, 1.5).kind is Kind.INFINITY_ONLY


def test_prefix_shape_and_domain():
    iv = bad_interval(0.3, 0.5, 1.5)
    assert iv.kind is Kind.BOUNDED and iv.left == 0.0
    assert bad_interval(0.0, 0.5, 1.5).is_empty
    with pytest.raises(ValueError):
        bad_interval(-1.0, 0.5, 1.5)


def test_large_gamma_regime_vanishes_after_l3():
    # gamma >= 1/a: no suffix shape, nothing bad once x >= L3.
    a, gamma = 0.5, 2.5
    l3 = (1 - a) / (gamma - 1)
    assert bad_interval(l3 + 0.1, a, gamma).is_empty
    assert bad_interval(50.0, a, gamma).is_empty
    assert not bad_interval(0.1, a, gamma).is_empty


def _check_against_brute(x, a, gamma, ts):
    iv = bad_interval(x, a, gamma)
    for t in ts:
        r = brute_ratio(t, x, a)
        if abs(r - gamma) < 1e-7:
            continue
        assert iv.contains(t) == (r > gamma), (t, x, r)
    # Infinity belongs exactly when never buying is bad at x.
    r_inf = brute_ratio(math.inf, x, a) if math.isinf(x) else x / min(x, 1 - a + a * x)
    if abs(r_inf - gamma) > 1e-7:
        assert iv.contains(math.inf) == (r_inf > gamma)


@settings(max_examples=200, deadline=None)
@given(
    a=st.floats(0.05, 0.9),
    frac=st.floats(0.0, 1.5),
    x=st.floats(1e-3, 40.0),
)
def test_matches_pointwise_ratio(a, frac, x):
    gamma = (2.0 - a) + frac * (1.0 / a - (2.0 - a))
    assume(abs(a * gamma - 1.0) > 1e-6)
    ts = np.concatenate((np.linspace(1e-4, x * 1.5 + 3, 400), [x, x * 0.999, x * 1.001]))
    _check_against_brute(x, a, gamma, ts)


def test_vectorised_matches_scalar():
    a, gamma = 0.8, 1.2
    xs = np.linspace(0.01, 8.0, 800)
    left, right, suffix = bad_interval_bounds(xs, a, gamma)
    for x, lo, hi, s in zip(xs, left, right, suffix):
        iv = bad_interval(x, a, gamma)
        if iv.is_empty:
            assert lo == hi
        else:
            assert lo == pytest.approx(iv.left)
            assert s == (iv.kind is Kind.SUFFIX)


def test_mass_in_examples():
    unit_inf = PurchaseDistribution.point_mass(0.1, math.inf, 10)
    suffix = bad_interval(4.0, 0.5, 1.5)
    assert mass_in(unit_inf, suffix) == 1.0
    assert mass_in(unit_inf, bad_interval(1.0, 0.5, 1.5)) == 0.0
    uniform = PurchaseDistribution(0.1, np.full(10, 0.1))
    assert mass_in(uniform, bad_interval(0.8, 0.5, 1.5)) == pytest.approx(0.2)


def test_grid_span_edges():
    # (0.6, 0.8] on a 0.1 grid holds points 7 and 8 despite rounding in 0.6/0.1.
    assert grid_span(0.6, 0.8, 0.1, 10) == (6, 8)
    assert grid_span(0.6, math.inf, 0.1, 10) == (6, 10)
    assert grid_span(-1.0, 0.05, 0.1, 10) == (0, 0)


def test_profile_matches_mass_in(rng):
    tau = 0.01
    masses = rng.random(700)
    f = PurchaseDistribution(tau, masses / masses.sum() * 0.9, 0.1)
    xs = tau * np.arange(1, 801)
    prof = bad_mass_profile(f, xs, 0.8, 1.2)
    for x, m in zip(xs[::7], prof[::7]):
        assert m == pytest.approx(mass_in(f, bad_interval(x, 0.8, 1.2)), abs=1e-12)
