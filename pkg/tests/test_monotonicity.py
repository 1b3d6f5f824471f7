import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from twosig.errors import DomainError, DomainExceeded, HypothesisViolation, TailError
from twosig.geometry import HalfGrid, SpaceTimeField
from twosig.monotonicity import (
    MonotonicityReport,
    _aitken,
    blowup_drive,
    heat_kernel,
    i_functional,
    i_functional_estimate,
    phi,
    phi_rescaling_check,
)


def _box_field(fn, t, h, R=None, nt=16):
    # half-grid field covering the default truncation box of I(t)
    R = 8 * np.sqrt(t) if R is None else R
    n = int(round(R / h))
    x1 = np.linspace(-R, R, 2 * n + 1)
    xn = np.linspace(0, R, n + 1)
    ts = np.linspace(-t, 0, nt + 1)
    return SpaceTimeField.from_function(fn, x1, xn, ts)


def _scaled(u, c):
    return SpaceTimeField(u.x1, u.xn, u.t, c * u.values)


def test_heat_kernel_examples():
    assert heat_kernel(np.zeros(2), 1 / (4 * np.pi)) == pytest.approx(1.0, rel=1e-15)
    t = 0.3
    assert heat_kernel(np.sqrt(4 * t), t, 1) == pytest.approx(
        (4 * np.pi * t) ** -0.5 * np.exp(-1), rel=1e-15)
    with pytest.raises(DomainError):
        heat_kernel(0.0, 0.0)


@pytest.mark.parametrize("t", [0.01, 0.5, 3.0])
def test_heat_kernel_normalized(t):
    mass1, _ = quad(lambda x: heat_kernel(x, t, 1), -np.inf, np.inf)
    assert mass1 == pytest.approx(1.0, abs=1e-8)
    radial, _ = quad(lambda r: 2 * np.pi * r * heat_kernel(np.array([r, 0.0]), t), 0, np.inf)
    assert radial == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("t", [1 / 16, 1 / 4])
def test_i_of_constant_and_linear(t):
    c = _box_field(lambda a, b, s: 3.0 + 0 * (a + b + s), t, np.sqrt(t) / 4)
    assert i_functional(c, t) == 0.0
    xn = _box_field(lambda a, b, s: b + 0 * (a + s), t, np.sqrt(t) / 4)
    assert i_functional(xn, t) == pytest.approx(t, rel=1e-6)


@pytest.mark.parametrize("alpha", [1.0, 2.5])
def test_i_of_half_linear(alpha):
    t = 0.25
    v = _box_field(lambda a, b, s: alpha * b + 0 * (a + s), t, 1 / 16)
    full = SpaceTimeField(v.x1, np.concatenate([-v.xn[:0:-1], v.xn]), v.t,
                          np.concatenate([0 * v.values[:, :, :0:-1], v.values], axis=2))
    assert i_functional(full, t) == pytest.approx(alpha ** 2 * t / 2, rel=1e-6)


def test_i_quadrature_converges_second_order():
    # |grad(x1 xn)|^2 = |x|^2 and the Gaussian second moment give I = 2 t^2
    t = 0.25
    errs = [abs(i_functional(_box_field(lambda a, b, s: a * b + 0 * s, t, h), t) - 2 * t * t)
            for h in (1 / 8, 1 / 16)]
    assert np.log2(errs[0] / errs[1]) >= 1.9


def test_i_error_estimate_covers_error():
    t = 0.25
    q = i_functional_estimate(_box_field(lambda a, b, s: a * a + 0 * (b + s), t, 1 / 8), t)
    # |grad x1^2|^2 = 4 x1^2 with second moment 2 tau per axis: I = 4 t^2
    assert abs(q.value - 4 * t * t) <= 2 * q.error
    assert q.radius == 4.0


def test_i_domain_and_tail_errors():
    t = 0.25
    v = _box_field(lambda a, b, s: b + 0 * (a + s), t, 1 / 8)
    with pytest.raises(DomainError):
        i_functional(v, 1.0)
    with pytest.raises(DomainError):
        i_functional(v, 0.0)
    with pytest.raises(TailError):
        i_functional_estimate(v, t, radius=1.0, accuracy=1e-6)


@pytest.mark.parametrize("a, b", [(1.0, 1.0), (2.0, 3.0)])
@pytest.mark.parametrize("t", [1 / 16, 1 / 4])
def test_phi_linear_pair(a, b, t):
    up = _box_field(lambda x, y, s: a * y + 0 * (x + s), t, np.sqrt(t) / 4)
    um = _box_field(lambda x, y, s: b * y + 0 * (x + s), t, np.sqrt(t) / 4)
    # half-grid fields are reflected to a|xn| and b|xn|, so I = a^2 t and b^2 t;
    # the supports overlap, hence the hypothesis check is switched off
    v = phi(up, um, t, tol=np.inf)
    assert v.value == pytest.approx(a * a * b * b, rel=1e-5)


def test_phi_zero_factor_and_symmetry():
    t = 0.25
    u = _box_field(lambda x, y, s: x * y + 0 * s, t, 1 / 8)
    z = _box_field(lambda x, y, s: 0 * (x + y + s), t, 1 / 8)
    assert phi(u, z, t).value == 0.0
    w = _box_field(lambda x, y, s: np.sin(x) * y + 0 * s, t, 1 / 8)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HypothesisViolation)
        assert phi(u, w, t).value == pytest.approx(phi(w, u, t).value, rel=1e-14)
        scaled = phi(_scaled(u, 2), _scaled(w, 3), t).value
    assert scaled == pytest.approx(36 * phi(u, w, t, tol=np.inf).value, rel=1e-12)


def test_phi_flags_overlapping_supports():
    t = 0.25
    u = _box_field(lambda x, y, s: 1 + y + 0 * (x + s), t, 1 / 8)
    with pytest.warns(HypothesisViolation):
        v = phi(u, u, t)
    assert v.violations


def test_rescaling_identity_on_linear_split():
    t = 1 / 4
    h = 1 / 16
    R = 8 * np.sqrt(t)
    n = int(round(R / h))
    x1 = np.linspace(-R, R, 2 * n + 1)
    xn = np.linspace(-R, R, 2 * n + 1)
    ts = np.linspace(-1.0, 0.0, 65)
    u = SpaceTimeField.from_function(lambda a, b, s: b + 0 * (a + s), x1, xn, ts)
    for r in (1.0, 0.5):
        lhs, rhs = phi_rescaling_check(u.restrict(t_lim=(-t * r * r, 0.0)), r, t)
        assert lhs == pytest.approx(0.25, rel=1e-5)
        assert rhs == pytest.approx(lhs, rel=1e-12)


def test_report_monotone_flag():
    def rep(ph, err):
        n = len(ph)
        z = np.zeros(n)
        return MonotonicityReport((0.0, 0.0), np.arange(1, n + 1.0), z, z,
                                  np.array(ph), np.array(err), z, 0.0)
    assert rep([1.0, 2.0, 3.0], [0, 0, 0]).monotone
    assert not rep([1.0, 0.9], [0.01, 0.01]).monotone
    assert rep([1.0, 0.99], [0.01, 0.01]).monotone


def test_aitken_geometric():
    seq = [1 + 0.5 ** k for k in range(3, 6)]
    assert _aitken(seq) == pytest.approx(1.0, abs=1e-14)
    assert _aitken([1.0, 2.0]) == 2.0


def _half_grid_field(fn):
    g = HalfGrid(65, 33, 16, t_range=(-0.25, 0.0))
    return SpaceTimeField.from_function(fn, g.x1, g.xn, g.t)


def test_blowup_one_phase_vanishes():
    u = _half_grid_field(lambda a, b, s: 2 * b + 0 * (a + s))
    rep = blowup_drive(u, (0.0, 0.0), [1 / 8, 1 / 16], t_samples=(0.25, 1.0))
    assert np.all(rep.phi == 0.0) and rep.phi_by_radius == [0.0, 0.0]


def test_blowup_complementary_linear_pair_constant():
    u = _half_grid_field(lambda a, b, s: a + 0 * (b + s))
    rep = blowup_drive(u, (0.0, 0.0), [1 / 8, 1 / 16], t_samples=(0.25, 0.5, 1.0))
    np.testing.assert_allclose(rep.phi, 0.25, rtol=1e-5)
    np.testing.assert_allclose(rep.phi_by_radius, 0.25, rtol=1e-5)
    assert rep.monotone


def test_blowup_rejects_oversized_radius():
    u = _half_grid_field(lambda a, b, s: a + 0 * (b + s))
    with pytest.raises(DomainExceeded):
        blowup_drive(u, (0.0, 0.0), [0.5], t_samples=(1.0,))
