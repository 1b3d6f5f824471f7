"""Positivity/negativity sets of the thin trace, the free boundaries
Gamma+ and Gamma-, the coincidence set and their parabolic separation.

Free-boundary points are midpoints of thin-line edges across which the
``trace > sigma`` (resp. ``trace < -sigma``) indicator flips, one list per
time slice.  Transitions of the indicator between time slices are exposed
separately by :func:`time_transitions` and never mixed into Gamma.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ParabolicCylinder, SpaceTimeField, points_in, set_distance


@dataclass
class FreeBoundaryTrack:
    x1: np.ndarray                 # thin-line node coordinates
    t: np.ndarray                  # times of the tracked slices
    time_index: np.ndarray         # their indices in the source field
    plus: list[np.ndarray]         # Gamma+ abscissae per slice
    minus: list[np.ndarray]        # Gamma- abscissae per slice
    signs: np.ndarray              # (n_slices, nx1) in {-1, 0, +1}
    sigma: float

    @property
    def coincidence(self) -> np.ndarray:
        """Boolean mask of thin nodes with ``|trace| <= sigma`` per slice."""
        return self.signs == 0

    def points(self, phase: str) -> np.ndarray:
        """``(m, 3)`` array of ``(x1, 0, t)`` sorted by slice then ``x1``."""
        lists = self.plus if phase == "+" else self.minus
        rows = [np.column_stack([xs, np.zeros_like(xs), np.full_like(xs, t)])
                for xs, t in zip(lists, self.t) if len(xs)]
        return np.vstack(rows) if rows else np.zeros((0, 3))

    def slice_of(self, t: float) -> int:
        return int(np.argmin(np.abs(self.t - t)))


def default_sigma(trace: np.ndarray) -> float:
    """``10 * machine eps * max |trace|``."""
    return 10.0 * np.finfo(float).eps * float(np.max(np.abs(trace), initial=0.0))


def _transition_midpoints(x1: np.ndarray, ind: np.ndarray) -> np.ndarray:
    flips = np.nonzero(ind[:-1] != ind[1:])[0]
    return 0.5 * (x1[flips] + x1[flips + 1])


def extract(u: SpaceTimeField, sigma: float | None = None) -> FreeBoundaryTrack:
    """Free boundaries of every slice after the initial one."""
    tr = u.trace()
    if sigma is None:
        sigma = default_sigma(tr)
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    tr = tr[1:]
    signs = np.where(tr > sigma, 1, np.where(tr < -sigma, -1, 0)).astype(np.int8)
    plus = [_transition_midpoints(u.x1, row == 1) for row in signs]
    minus = [_transition_midpoints(u.x1, row == -1) for row in signs]
    return FreeBoundaryTrack(u.x1.copy(), u.t[1:].copy(), np.arange(1, len(u.t)),
                             plus, minus, signs, float(sigma))


def time_transitions(track: FreeBoundaryTrack, phase: str = "+") -> np.ndarray:
    """``(x1, 0, t_mid)`` at nodes whose phase indicator flips between slices."""
    val = 1 if phase == "+" else -1
    ind = track.signs == val
    k, i = np.nonzero(ind[:-1] != ind[1:])
    tm = 0.5 * (track.t[k] + track.t[k + 1])
    return np.column_stack([track.x1[i], np.zeros_like(tm), tm])


def separation(track: FreeBoundaryTrack, window: ParabolicCylinder) -> float:
    """``d_p(Gamma+ & window, Gamma- & window)``; ``inf`` if either is empty."""
    return set_distance(points_in(track.points("+"), window),
                        points_in(track.points("-"), window))


def separation_per_slice(track: FreeBoundaryTrack, radius: float = 0.5,
                         center: float = 0.0) -> np.ndarray:
    """Spatial gap between Gamma+ and Gamma- within ``|x1 - center| < radius``, per slice."""
    out = np.full(len(track.t), np.inf)
    for k, (p, m) in enumerate(zip(track.plus, track.minus)):
        p = p[np.abs(p - center) < radius]
        m = m[np.abs(m - center) < radius]
        if len(p) and len(m):
            out[k] = float(np.min(np.abs(p[:, None] - m[None, :])))
    return out


def root_estimates(u: SpaceTimeField, k: int, phase: str = "+") -> np.ndarray:
    """Linear-interpolation zero crossings of the trace on slice ``k``.

    Reported as an estimate only; the trace is merely C^{1,1/2} near Gamma.
    """
    tr = u.trace()[k]
    x = u.x1
    out = []
    for i in range(len(x) - 1):
        a, b = tr[i], tr[i + 1]
        hit = (a > 0) != (b > 0) if phase == "+" else (a < 0) != (b < 0)
        if hit and a != b:
            out.append(x[i] - a * (x[i + 1] - x[i]) / (b - a))
    return np.asarray(out)
