import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twosig.errors import ConfigError, DomainExceeded
from twosig.geometry import (
    HalfGrid,
    ParabolicCylinder,
    SpaceTimeField,
    cylinder_node_mask,
    parabolic_distance,
    reflect_even,
    rescale,
    set_distance,
)

coord = st.floats(-10, 10, allow_nan=False)
point = st.tuples(st.tuples(coord, coord), coord)


def test_grid_spacings_and_nodes():
    g = HalfGrid(5, 3, 4, x1_range=(-1, 1), height=0.5, t_range=(-1, 0))
    assert g.hx1 == 0.5 and g.hxn == 0.25 and g.dt == 0.25
    np.testing.assert_array_equal(g.x1, [-1, -0.5, 0, 0.5, 1])
    np.testing.assert_array_equal(g.t, [-1, -0.75, -0.5, -0.25, 0])
    # affine in the index: no accumulation
    big = HalfGrid(1001, 3, 7)
    assert big.x1[700] == -1.0 + 700 * big.hx1


@pytest.mark.parametrize("kw", [dict(nx1=2, nxn=3, nt=1), dict(nx1=5, nxn=1, nt=1),
                                dict(nx1=5, nxn=3, nt=0)])
def test_degenerate_grid(kw):
    with pytest.raises(ConfigError):
        HalfGrid(**kw)


def test_grid_refine_and_spacing():
    g = HalfGrid.from_spacing(1 / 8, 16)
    assert g.shape == (17, 9)
    f = g.refine(2, 4)
    assert f.hx1 == g.hx1 / 2 and f.dt == g.dt / 4
    with pytest.raises(ConfigError):
        HalfGrid.from_spacing(0.3, 4)


@pytest.mark.parametrize("p, q, d", [
    (((0, 0), 0), ((0, 0), 0), 0.0),
    (((0, 0), 0), ((3, 4), 0), 5.0),
    (((0, 0), 0), ((1, 0), -9), 3.0),
])
def test_parabolic_distance_examples(p, q, d):
    assert parabolic_distance(p, q) == d


@given(point, point, point)
@settings(max_examples=200, deadline=None)
def test_parabolic_distance_metric(p, q, r):
    d = parabolic_distance
    assert d(p, q) == d(q, p) >= 0
    assert d(p, r) <= d(p, q) + d(q, r) + 1e-9
    assert d(p, p) == 0


def test_set_distance_examples():
    assert set_distance([((0, 0), 0)], [((1, 0), 0)]) == 1.0
    assert set_distance([], [((1, 0), 0)]) == np.inf
    assert set_distance([((0, 0), 0)], [((0, 0), -0.25)]) == 0.5


def test_set_distance_matches_brute_force(rng):
    A = rng.normal(size=(300, 3))
    B = rng.normal(size=(200, 3))
    brute = min(parabolic_distance((a[:2], a[2]), (b[:2], b[2])) for a in A for b in B)
    assert set_distance(A, B) == pytest.approx(brute, rel=1e-14)


def test_cylinder_membership():
    c = ParabolicCylinder((0, 0, 0), 0.5, "past")
    assert c.contains(0.1, 0.1, -0.2)
    assert not c.contains(0.1, 0.1, -0.25)        # open at the bottom
    assert c.contains(0.0, 0.0, 0.0)              # closed at the top
    assert not c.contains(0.0, 0.0, 0.01)
    full = ParabolicCylinder((0, 0, 0), 0.5, "full")
    assert full.contains(0.0, 0.0, 0.2) and not full.contains(0.0, 0.0, 0.25)
    thin = ParabolicCylinder((0, 0, 0), 0.5, "thin")
    assert thin.contains(0.2, 0.0, -0.1) and not thin.contains(0.2, 0.1, -0.1)
    with pytest.raises(ConfigError):
        ParabolicCylinder((0, 0, 0), 0.0)


@given(st.integers(0, 16), st.integers(0, 8), st.integers(0, 16))
@settings(max_examples=100, deadline=None)
def test_cylinder_index_round_trip(i, j, k):
    g = HalfGrid(17, 9, 16)
    c = ParabolicCylinder((0.1, 0.0, -0.3), 0.4, "full")
    fld = SpaceTimeField.on_grid(g)
    mask = cylinder_node_mask(fld, c)
    assert mask[k, i, j] == bool(c.contains(g.x1[i], g.xn[j], g.t[k]))


def _field(fn, g=None):
    g = g or HalfGrid(9, 5, 4)
    return SpaceTimeField.from_function(fn, g.x1, g.xn, g.t)


def test_field_validation():
    g = HalfGrid(5, 3, 2)
    with pytest.raises(ConfigError):
        SpaceTimeField.on_grid(g, np.zeros((2, 5, 3)))
    bad = np.zeros((3, 5, 3))
    bad[1, 1, 1] = np.nan
    with pytest.raises(ConfigError):
        SpaceTimeField.on_grid(g, bad)


def test_trace_is_stored_row():
    u = _field(lambda a, b, t: a + 3 * b + t)
    np.testing.assert_array_equal(u.trace(), u.values[:, :, 0])


def test_reflect_even_examples():
    u = reflect_even(_field(lambda a, b, t: b + 0 * a))
    np.testing.assert_array_equal(u.values[0, 0], np.abs(u.xn))
    v = reflect_even(_field(lambda a, b, t: a + 0 * b))
    assert np.all(v.values[:, :, 0] == v.values[:, :, -1])
    w = reflect_even(_field(lambda a, b, t: b * b + 0 * a))
    j = int(np.argmin(np.abs(w.xn + w.xn[-1] / 4)))
    assert w.values[0, 0, j] == (w.xn[-1] / 4) ** 2


def test_reflect_even_byte_symmetric(rng):
    g = HalfGrid(7, 6, 3)
    u = reflect_even(SpaceTimeField.on_grid(g, rng.normal(size=(4, 7, 6))))
    assert u.values.tobytes() == u.values[:, :, ::-1].tobytes()
    assert u.xn[5] == 0.0 and len(u.xn) == 11


def test_rescale_examples():
    u = _field(lambda a, b, t: a * a + 2 * t + 0 * b, HalfGrid(17, 9, 16))
    assert rescale(u, 1.0).values.tobytes() == u.values.tobytes()
    r = rescale(u, 0.5)
    X = np.meshgrid(r.t, r.x1, r.xn, indexing="ij")
    np.testing.assert_allclose(r.values, 0.5 * (X[1] ** 2 + 2 * X[0]), rtol=0, atol=1e-14)
    lin = _field(lambda a, b, t: 3 * b + 0 * a)
    lr = rescale(lin, 0.25)
    np.testing.assert_allclose(lr.values, np.broadcast_to(3 * lr.xn, lr.values.shape), atol=1e-14)


def test_rescale_composition_and_domain():
    g = HalfGrid(33, 17, 16)
    u = _field(lambda a, b, t: np.sin(a) * np.cosh(b) + t, g)
    two = rescale(rescale(u, 0.5), 0.5)
    one = rescale(u, 0.25)
    np.testing.assert_allclose(two.values, one.values, rtol=0, atol=1e-13)
    with pytest.raises(DomainExceeded):
        rescale(u, 2.0, x1=u.x1, xn=u.xn, t=u.t)


def test_restrict_and_translate():
    u = _field(lambda a, b, t: a + 0 * b + 0 * t, HalfGrid(9, 5, 4))
    s = u.restrict(x1_lim=(-0.5, 0.5))
    assert s.x1[0] == -0.5 and s.x1[-1] == 0.5
    tr = u.translated(0.5, -1.0)
    assert tr.x1[0] == -1.5 and tr.t[0] == 0.0
