import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import bs_solve, config
from tailski.badinterval import bad_mass_profile
from tailski.binsearch import classical_ratio
from tailski.greedy import (
    GreedyMassError,
    Termination,
    World,
    alg_subroutine,
    f_one_plus_tau,
    greedy_with_opt,
    world_check,
)
from tailski.model import PurchaseDistribution
from tailski.ratio import partial_cr


def test_first_step():
    cfg = config(0.5, 1.5, 0.05, tau=0.01)
    assert alg_subroutine(cfg, 1.3).masses[0] == pytest.approx(0.006)
    p = alg_subroutine(cfg, 1.0)
    assert p.masses[0] == 0.0
    assert p.termination is Termination.WORLD_ONE_EXIT


def test_first_step_capped_by_delta():
    cfg = config(0.5, 1.5, 0.001, tau=0.01)
    assert alg_subroutine(cfg, 1.3).masses[0] == pytest.approx(0.001)


def test_total_mass_sides_of_classical_opt():
    cfg = config(0.5, 1.5, 1.0, tau=0.01)
    above = alg_subroutine(cfg, 1.30)
    assert above.termination is Termination.MASS_REACHED_ONE
    # The completing atom is capped at the missing mass.
    assert above.total == pytest.approx(1.0, abs=1e-12)
    below = alg_subroutine(cfg, 1.15)
    assert below.total < 1.0


def test_f_one_plus_tau_examples():
    assert f_one_plus_tau(0.9, 0.5, 0.5, 0.01) == pytest.approx(0.0015)
    assert f_one_plus_tau(1.0, 0.0, 0.3, 0.01) == 0.0


@given(s0=st.floats(0, 1), share=st.floats(0, 1), a=st.floats(0.01, 0.99), tau=st.floats(1e-4, 0.1))
def test_f_one_plus_tau_bounded_by_tau_a(s0, share, a, tau):
    # Masses live on (0, 1], so the first moment is at most the mass.
    s1 = s0 * share
    assert f_one_plus_tau(s0, s1, a, tau) <= tau * a + 1e-15


def test_world_examples():
    w1 = bs_solve(0.5, 1.5, 0.25)
    assert world_check(w1.distribution.masses, w1.opt_estimate, w1.config) is World.WORLD1
    w2 = bs_solve(0.8, 1.2, 0.05)
    assert world_check(w2.distribution.masses, w2.opt_estimate, w2.config) is World.WORLD2
    for a in (0.3, 0.5, 0.8):
        r = bs_solve(a, 2.0 - a, 1.0)
        assert world_check(r.distribution.masses, r.opt_estimate, r.config) is World.WORLD1


def test_world_one_exit_forms_agree_at_convergence():
    r = bs_solve(0.5, 1.5, 0.25, epsilon=1e-9)
    p = alg_subroutine(r.config, r.opt_estimate)
    assert p.termination is Termination.WORLD_ONE_EXIT
    assert p.mass_inf == pytest.approx((r.opt_estimate - 1) / (1 / 0.5 - 1), abs=1e-6)


def test_greedy_with_opt_world_one():
    r = bs_solve(0.5, 1.5, 0.25, epsilon=1e-9)
    f, world = greedy_with_opt(r.config, r.opt_estimate)
    assert world is World.WORLD1
    assert np.all(f.masses[r.config.k_one:] == 0.0)
    assert f.mass_inf == pytest.approx((r.opt_estimate - 1) / (1 / 0.5 - 1), abs=1e-12)


def test_greedy_with_opt_world_two():
    r = bs_solve(0.8, 1.2, 0.05, epsilon=1e-9)
    f, world = greedy_with_opt(r.config, r.opt_estimate)
    assert world is World.WORLD2
    assert f.total == pytest.approx(1.0, abs=1e-12)
    assert math.fsum(f.masses[r.config.k_lb:]) == pytest.approx(0.05, abs=1e-6)


@pytest.mark.parametrize("a,gamma,delta", [(0.5, 1.5, 0.25), (0.8, 1.2, 0.05), (0.5, 1.5, 1.0)])
def test_greedy_with_opt_rejects_large_opt(a, gamma, delta):
    cfg = config(a, gamma, delta, tau=0.01)
    with pytest.raises(GreedyMassError):
        greedy_with_opt(cfg, 2.0 - a + 0.1)


def test_exponential_growth_after_one():
    r = bs_solve(0.8, 1.2, 0.05, epsilon=1e-9)
    p = alg_subroutine(r.config, r.bracket[1])
    k1 = r.config.k_one
    m = p.masses
    # CR-tight stretch: until the bad-interval budget first binds.
    budget = 0.05 - bad_mass_profile(
        PurchaseDistribution(r.config.tau, m / m.sum()), r.config.tau * np.arange(1, m.size + 1), 0.8, 1.2
    ) * m.sum()
    end = k1 + int(np.argmax(np.abs(budget[k1:]) <= 1e-9))
    ratios = m[k1 + 1 : end] / m[k1 : end - 1]
    assert end - k1 > 100
    np.testing.assert_allclose(ratios, 1.0 + r.config.tau, rtol=1e-7)


def test_prefix_is_tight_for_guess():
    cfg = config(0.8, 1.2, 0.05, tau=0.001)
    T = 1.12
    p = alg_subroutine(cfg, T)
    m = p.masses
    xs = cfg.tau * np.arange(1, cfg.k_one + 1)
    cr = np.array([partial_cr(m, cfg.tau, x, 0.8) for x in xs])
    f = PurchaseDistribution(cfg.tau, m / m.sum())
    bad = bad_mass_profile(f, xs, 0.8, 1.2) * m.sum()
    tight = (np.abs(cr - T) <= 1e-8) | (np.abs(bad - 0.05) <= 1e-8)
    assert tight.all()


@settings(max_examples=15, deadline=None)
@given(frac=st.floats(0, 1), which=st.sampled_from([(0.5, 1.5, 0.05), (0.5, 1.5, 0.25), (0.8, 1.2, 0.1), (0.6, 1.4, 0.05)]))
def test_output_feasible_for_guess(frac, which):
    a, gamma, delta = which
    cfg = config(a, gamma, delta, tau=0.01)
    T = classical_ratio(a) + frac * (2.0 - a - classical_ratio(a))
    p = alg_subroutine(cfg, T)
    m = p.masses
    assert np.all(m >= 0)
    xs = cfg.tau * np.arange(1, max(m.size, cfg.k_lb) + 40)
    # After a world-1 exit below OPT the unplaced mass is charged as if it
    # sat at infinity, so the ratio after 1 exceeds the guess there.
    capped = p.termination is Termination.WORLD_ONE_EXIT and p.total < 1.0 - 1e-9
    for x in xs[::3]:
        if capped and x > 1.0:
            continue
        assert partial_cr(m, cfg.tau, x, a) <= T + 1e-8
    scale = max(m.sum(), 1e-300)
    f = PurchaseDistribution(cfg.tau, m / scale, 0.0)
    assert np.all(bad_mass_profile(f, xs, a, gamma) * scale <= delta + 1e-9)
    if p.mass_inf is not None:
        assert p.mass_inf <= delta + 1e-9


def test_total_mass_monotone_in_guess():
    cfg = config(0.6, 1.4, 0.05, tau=0.01)
    ts = np.linspace(classical_ratio(0.6), 1.4, 25)
    totals = [alg_subroutine(cfg, T).total for T in ts]
    assert all(b >= a - 1e-12 for a, b in zip(totals, totals[1:]))
