import numpy as np
import pytest
import sympy as s

from twosig.errors import AdmissibilityError
from twosig.oracles import caloric_neumann_oracle, linear_oracle, signorini32_oracle
from twosig.penalty import PenaltyParams

x, y, t = s.symbols("x y t", real=True)


def test_signorini32_harmonic_symbolic():
    # in the open upper half-plane Re (x + i y)^(3/2) = r^(3/2) cos(3 theta / 2)
    r, th = s.symbols("r theta", positive=True)
    u = r ** s.Rational(3, 2) * s.cos(3 * th / 2)
    lap = s.diff(u, r, 2) + s.diff(u, r) / r + s.diff(u, th, 2) / r ** 2
    assert s.simplify(lap) == 0


def test_signorini32_matches_polar_form():
    p = PenaltyParams(4.0, 1.0)
    o = signorini32_oracle(p)
    rng = np.random.default_rng(1)
    a, b = rng.uniform(-0.25, 0.25, 50), rng.uniform(0.001, 0.25, 50)
    r, th = np.hypot(a, b), np.arctan2(b, a)
    np.testing.assert_allclose(o.u(a, b), r ** 1.5 * np.cos(1.5 * th) + 4 * b, atol=1e-14)


def test_signorini32_traces_and_flux():
    p = PenaltyParams(4.0, 1.0)
    o = signorini32_oracle(p)
    assert o.trace(1 / 16) == pytest.approx(1 / 64, abs=1e-15)
    assert o.trace(-0.1) == 0.0
    assert o.flux(0.1) == 4.0
    assert o.flux(-1 / 16) == pytest.approx(4.0 - 0.375, abs=1e-15)
    # flux by a one-sided difference quotient
    h = 1e-7
    for a in (-0.2, -0.05, 0.1):
        fd = (o.u(a, h) - o.u(a, 0.0)) / h
        assert fd == pytest.approx(o.flux(a), abs=1e-3)


def test_signorini32_gradient_matches_differences():
    o = signorini32_oracle(PenaltyParams(4.0, 1.0))
    h = 1e-6
    for a, b in [(0.1, 0.05), (-0.1, 0.2), (0.0, 0.1)]:
        gx, gy = o.grad(a, b)
        assert gx == pytest.approx((o.u(a + h, b) - o.u(a - h, b)) / (2 * h), abs=1e-6)
        assert gy == pytest.approx((o.u(a, b + h) - o.u(a, b - h)) / (2 * h), abs=1e-6)


def test_signorini32_admissibility():
    with pytest.raises(AdmissibilityError):
        signorini32_oracle(PenaltyParams(1.0, 1.0), radius=1.0)
    signorini32_oracle(PenaltyParams(2.0, 1.0), radius=1.0)


def test_caloric_neumann_symbolic():
    lp, s0 = 1.5, 3.0
    u = lp * y + x ** 2 + 2 * t + s0
    assert s.simplify(s.diff(u, t) - s.diff(u, x, 2) - s.diff(u, y, 2)) == 0
    assert s.diff(u, y).subs(y, 0) == lp
    o = caloric_neumann_oracle(PenaltyParams(lp, 1.0), s0)
    for a, b, c in [(0.3, 0.2, -0.5), (-1.0, 0.0, -1.0)]:
        assert o.u(a, b, c) == pytest.approx(float(u.subs({x: a, y: b, t: c})), abs=1e-14)
    assert o.trace(0.5, -0.25) == pytest.approx(0.25 - 0.5 + 3.0)


def test_caloric_neumann_admissibility():
    with pytest.raises(AdmissibilityError):
        caloric_neumann_oracle(PenaltyParams(1, 1), s0=2.0)
    caloric_neumann_oracle(PenaltyParams(1, 1), s0=2.5)


def test_linear_oracle():
    p = PenaltyParams(2.0, 1.0)
    o = linear_oracle(-1.0, p)
    assert o.u(0.3, 0.5, 0.0) == -0.5
    assert o.flux(0.0, 0.0) == -1.0 and o.trace(0.4, 0.0) == 0.0
    with pytest.raises(AdmissibilityError):
        linear_oracle(2.5, p)
    with pytest.raises(AdmissibilityError):
        linear_oracle(-1.5, p)
