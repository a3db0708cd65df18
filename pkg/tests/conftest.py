import functools
import math

import numpy as np
import pytest

from tailski.binsearch import binary_search
from tailski.lp import build_lp, solve_lp
from tailski.model import ProblemConfig


@functools.lru_cache(maxsize=None)
def config(a, gamma, delta, tau=1e-3, epsilon=1e-6):
    return ProblemConfig(a, gamma, delta, tau=tau, epsilon=epsilon)


@functools.lru_cache(maxsize=None)
def bs_solve(a, gamma, delta, tau=1e-3, epsilon=1e-6):
    return binary_search(config(a, gamma, delta, tau, epsilon))


@functools.lru_cache(maxsize=None)
def lp_solve(a, gamma, delta, tau=1e-3, epsilon=1e-6, backend="auto"):
    return solve_lp(build_lp(config(a, gamma, delta, tau, epsilon)), backend)


def switch_cost(t, x, a):
    """Cost of renting until t then buying, when the season ends at x."""
    if math.isinf(x):
        return math.inf
    if t > x:
        return x
    return t + (1.0 - a) + a * (x - t)


def offline_cost(x, a):
    return min(x, 1.0 - a + a * x)


def brute_ratio(t, x, a):
    """Pointwise ratio from first principles, with x = inf as a limit."""
    if math.isinf(x):
        if math.isinf(t):
            return 1.0 / a
        return 1.0
    return switch_cost(t, x, a) / offline_cost(x, a)


def brute_expected(masses, mass_inf, tau, x, a):
    total = sum(m * brute_ratio((i + 1) * tau, x, a) for i, m in enumerate(masses))
    return total + mass_inf * brute_ratio(math.inf, x, a)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
