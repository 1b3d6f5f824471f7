import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twosig.freeboundary import (
    default_sigma,
    extract,
    root_estimates,
    separation,
    separation_per_slice,
    time_transitions,
)
from twosig.geometry import HalfGrid, ParabolicCylinder, SpaceTimeField
from twosig.oracles import linear_oracle, signorini32_oracle
from twosig.penalty import PenaltyParams


def _from_trace(x1, t, trace):
    trace = np.asarray(trace, dtype=float)
    vals = np.repeat(trace[:, :, None], 2, axis=2)
    return SpaceTimeField(np.asarray(x1, float), np.array([0.0, 1.0]),
                          np.asarray(t, float), vals)


def test_zero_trace_has_no_boundaries():
    u = _from_trace(np.linspace(-1, 1, 5), [0, 1, 2], np.zeros((3, 5)))
    tr = extract(u)
    assert all(len(a) == 0 for a in tr.plus + tr.minus)
    assert np.all(tr.coincidence)


def test_linear_oracle_has_no_boundaries():
    g = HalfGrid(17, 9, 4)
    u = linear_oracle(0.5, PenaltyParams(1, 1)).field(g)
    tr = extract(u)
    assert tr.points("+").shape == (0, 3) and tr.points("-").shape == (0, 3)


def test_constructed_transition():
    x1 = np.linspace(-1, 1, 5)
    u = _from_trace(x1, [-1.0, 0.0], [[0, 0, 0, 0, 0], [0, 0, 0, 1, 1]])
    tr = extract(u, sigma=0.5)
    np.testing.assert_array_equal(tr.plus[0], [0.25])
    assert len(tr.minus[0]) == 0
    np.testing.assert_array_equal(tr.points("+"), [[0.25, 0.0, 0.0]])
    # the initial slice is not tracked; the flip in time is reported apart
    assert len(tr.t) == 1
    with pytest.raises(ValueError):
        extract(u, sigma=-1.0)


def test_time_transitions_separate_from_gamma():
    x1 = np.linspace(-1, 1, 5)
    trace = [[0] * 5, [1, 1, 1, 1, 1], [1, 1, 1, 1, 1], [0, 0, 1, 1, 1]]
    u = _from_trace(x1, [0, 1, 2, 3], trace)
    tr = extract(u, sigma=0.5)
    assert all(len(p) == 0 for p in tr.plus[:2])
    tt = time_transitions(tr, "+")
    np.testing.assert_array_equal(tt[:, 0], [-1.0, -0.5])
    np.testing.assert_array_equal(tt[:, 2], [2.5, 2.5])


def test_separation_examples():
    x1 = np.linspace(-2, 2, 9)
    # Gamma- at -0.25 and Gamma+ at 0.75: spatial distance 1
    u = _from_trace(x1, [0.0, 0.0], [[0] * 9, [-1, -1, -1, -1, 0, 0, 1, 1, 1]])
    tr = extract(u, sigma=0.5)
    win = ParabolicCylinder((0, 0, 0), 2.0, "full")
    assert separation(tr, win) == 1.0
    np.testing.assert_array_equal(separation_per_slice(tr, radius=2.0), [1.0])
    one_phase = _from_trace(x1, [0.0, 0.0], [[0] * 9, [0, 0, 0, 0, 0, 0, 1, 1, 1]])
    assert separation(extract(one_phase, 0.5), win) == np.inf


def test_signorini32_separation_infinite():
    g = HalfGrid(65, 33, 2, x1_range=(-0.25, 0.25), height=0.25)
    u = signorini32_oracle(PenaltyParams(4, 1)).field(g)
    tr = extract(u)
    assert separation(tr, ParabolicCylinder((0, 0, 0), 1.0, "full")) == np.inf
    assert all(len(p) == 1 for p in tr.plus)


def test_default_sigma_scales():
    assert default_sigma(np.array([0.0, -2.0])) == 20 * np.finfo(float).eps
    assert default_sigma(np.zeros(3)) == 0.0


@given(st.lists(st.floats(-1, 1), min_size=8, max_size=8), st.floats(0, 0.5), st.floats(0, 0.5))
@settings(max_examples=200, deadline=None)
def test_positivity_set_shrinks_with_sigma(trace, s1, s2):
    lo, hi = sorted((s1, s2))
    u = _from_trace(np.linspace(-1, 1, 8), [0, 1], [trace, trace])
    a, b = extract(u, lo), extract(u, hi)
    assert np.all((b.signs == 1) <= (a.signs == 1))
    assert np.all((b.signs == -1) <= (a.signs == -1))
    assert np.all(a.coincidence <= b.coincidence)


def test_root_estimates_linear():
    x1 = np.linspace(-1, 1, 5)
    u = _from_trace(x1, [0.0], [x1 - 0.1])
    np.testing.assert_allclose(root_estimates(u, 0, "+"), [0.1])
