import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from twosig.errors import ConfigError
from twosig.penalty import (
    PenaltyParams,
    b_eps_value,
    b_value,
    beta_eps,
    beta_eps_slope,
    prox_b,
)

pos = st.floats(0.05, 20.0)
real = st.floats(-50, 50, allow_nan=False)


def test_params_validation():
    for bad in [(0, 1, 1), (1, -1, 1), (1, 1, 0)]:
        with pytest.raises(ConfigError):
            PenaltyParams(*bad)
    assert PenaltyParams(2, 5).Lambda == 5


def test_b_examples():
    assert b_value(2.0, PenaltyParams(1, 1)) == 2
    assert b_value(0.0, PenaltyParams(1, 1)) == 0
    assert b_value(-3.0, PenaltyParams(1, 5)) == 15


def test_beta_examples():
    p = PenaltyParams(2.0, 3.0, 0.1)
    assert beta_eps(0.1, p) == 2.0
    assert beta_eps(-0.1, p) == -3.0
    assert beta_eps(0.0, PenaltyParams(1, 1, 0.1)) == 0.0
    q = PenaltyParams(1, 1, 0.5)
    assert beta_eps_slope(0.0, q) == 2.0
    assert beta_eps_slope(1.0, q) == 0.0 and beta_eps_slope(-1.0, q) == 0.0


@pytest.mark.parametrize("smooth", [False, True])
def test_b_eps_is_antiderivative(smooth):
    p = PenaltyParams(1.5, 0.7, 0.2, smooth)
    for s in [-1.0, -0.2, -0.05, 0.0, 0.13, 0.2, 0.9]:
        integral, _ = quad(lambda x: float(beta_eps(x, p)), 0.0, s, points=[-0.2, 0.2])
        assert b_eps_value(s, p) == pytest.approx(integral, abs=1e-12)


def test_b_eps_offset_outside_band():
    p = PenaltyParams(1.5, 0.7, 0.2)
    s = np.array([-2.0, -0.5, 0.5, 2.0])
    np.testing.assert_allclose(b_value(s, p) - b_eps_value(s, p),
                               p.epsilon * (p.lambda_plus + p.lambda_minus) / 4)


@given(pos, pos, pos, real, real)
@settings(max_examples=300, deadline=None)
def test_beta_monotone_bounded(lp, lm, eps, s, t):
    for smooth in (False, True):
        p = PenaltyParams(lp, lm, eps, smooth)
        lo, hi = min(s, t), max(s, t)
        assert beta_eps(lo, p) <= beta_eps(hi, p)
        assert abs(beta_eps(s, p)) <= p.Lambda + 1e-12
        assert beta_eps_slope(s, p) >= 0


@given(pos, pos, real, real, real)
@settings(max_examples=300, deadline=None)
def test_b_convex_midpoint(lp, lm, a, b, c):
    p = PenaltyParams(lp, lm)
    for x, y in ((a, b), (b, c), (a, c)):
        assert b_value(0.5 * (x + y), p) <= 0.5 * (b_value(x, p) + b_value(y, p)) + 1e-9


@pytest.mark.parametrize("s", [-0.3, 0.3, 2.0])
def test_beta_tends_to_selection(s):
    p = PenaltyParams(1.3, 0.8, 1.0)
    target = p.lambda_plus if s > 0 else -p.lambda_minus
    errs = [abs(beta_eps(s, p.with_epsilon(2.0 ** -k)) - target) for k in range(8)]
    assert errs[-1] == 0.0
    assert all(b <= a for a, b in zip(errs, errs[1:]))


def test_lipschitz_constant():
    p = PenaltyParams(1.0, 3.0, 0.25)
    s = np.linspace(-1, 1, 20001)
    slopes = np.diff(beta_eps(s, p)) / np.diff(s)
    assert np.max(slopes) == pytest.approx(p.ramp_slope, rel=1e-9)


def test_prox_examples():
    p = PenaltyParams(1, 1)
    assert prox_b(3.0, 1.0, 1.0, p) == 2.0
    assert prox_b(0.0, 1.0, 1.0, p) == 0.0
    assert prox_b(-0.5, 1.0, 1.0, p) == 0.0
    assert prox_b(-0.5, 1.0, 0.0, p) == -0.5


def _brute_prox(q, a, w, p):
    # the objective is convex, so its minimizer is where the right derivative
    # a (s - q) + w B'(s+) changes sign: bisect on that sign to machine precision
    def right_slope(s):
        return a * (s - q) + w * (p.lambda_plus if s >= 0 else -p.lambda_minus)

    lo = min(q, 0.0) - 1.0 - w * p.Lambda / a
    hi = max(q, 0.0) + 1.0 + w * p.Lambda / a
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if right_slope(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return hi


def test_prox_matches_brute_force():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(10_000):
        q = rng.uniform(-5, 5)
        a = rng.uniform(0.1, 5)
        w = rng.uniform(0, 3)
        p = PenaltyParams(rng.uniform(0.1, 3), rng.uniform(0.1, 3))
        worst = max(worst, abs(float(prox_b(q, a, w, p)) - _brute_prox(q, a, w, p)))
    assert worst <= 1e-10


@given(pos, pos, pos, st.floats(0, 5), real, real)
@settings(max_examples=200, deadline=None)
def test_prox_nonexpansive(lp, lm, a, w, q1, q2):
    p = PenaltyParams(lp, lm)
    assert abs(prox_b(q1, a, w, p) - prox_b(q2, a, w, p)) <= abs(q1 - q2) + 1e-12
