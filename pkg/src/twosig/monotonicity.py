"""Heat-kernel weighted Dirichlet integrals and the two-phase monotonicity
functional

    I(t, v) = int_{-t}^{0} int_{R^2} |grad v(x, s)|^2 G(x, -s) dx ds,
    Phi(t; u1, u2) = I(t, u1) I(t, u2) / t^2,

evaluated on grid fields centered at the origin.

Quadrature
----------
Space: ``|grad v|^2`` at cell centers (centered differences averaged over
the cell) times the exact Gaussian mass of the cell, a product of ``erf``
differences.  Exact cell masses keep the rule stable when ``-s`` is far
below the cell size.  Only cells inside the box of half-width
``R_c = 8 sqrt(t)`` are used; the omitted mass is bounded by
``L^2 t exp(-R_c^2 / (4 t))`` with ``L`` the largest gradient seen.

Time: geometric panels ``[t 2^-(k+1), t 2^-k]`` (20 levels) in the kernel
time ``tau = -s``, further split at stored time levels, with Gauss-Legendre
nodes on each panel.  The field is linear in time between levels.

The error estimate adds the 4- vs 2-point time difference, a coarse-grid
Richardson term and the tail bound.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import erf

from .errors import DomainError, DomainExceeded, HypothesisViolation, TailError
from .geometry import SpaceTimeField, reflect_even, rescale

log = logging.getLogger(__name__)

RC_FACTOR = 8.0
LEVELS = 20
GL_POINTS = 4
_SNAP = 1e-9


def heat_kernel(x, t: float, n: int | None = None):
    """``(4 pi t)^(-n/2) exp(-|x|^2 / (4 t))``.

    ``x`` has shape ``(..., n)``; for ``n = 1`` plain scalars/arrays are
    accepted as well.
    """
    if not t > 0:
        raise DomainError(f"heat kernel needs t > 0, got {t}")
    x = np.asarray(x, dtype=float)
    if n is None:
        n = 1 if x.ndim == 0 else x.shape[-1]
    if n == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        r2 = x * x
    else:
        if x.shape[-1] != n:
            raise ValueError(f"last axis of x must have length {n}")
        r2 = np.sum(x * x, axis=-1)
    return (4.0 * np.pi * t) ** (-0.5 * n) * np.exp(-r2 / (4.0 * t))


def _cell_mass(edges: np.ndarray, tau: float) -> np.ndarray:
    """1-D Gaussian mass of the intervals between consecutive ``edges``."""
    c = erf(edges / np.sqrt(4.0 * tau))
    return 0.5 * np.diff(c)


@dataclass
class Quadrature:
    """Value of ``I(t, v)`` with its error budget."""

    value: float
    error: float
    time_error: float
    space_error: float
    tail: float
    radius: float

    def __float__(self) -> float:
        return self.value


class _GradientCache:
    """Cell-center gradients of a reflected field, per stored time level."""

    def __init__(self, v: SpaceTimeField, ix: np.ndarray, jx: np.ndarray):
        self.v = v
        self.ix, self.jx = ix, jx
        self.ex = v.x1[ix]
        self.ey = v.xn[jx]
        self._cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def level(self, k: int):
        if k not in self._cache:
            u = self.v.values[k][np.ix_(self.ix, self.jx)]
            hx = np.diff(self.ex)[:, None]
            hy = np.diff(self.ey)[None, :]
            gx = 0.5 * (u[1:, 1:] - u[:-1, 1:] + u[1:, :-1] - u[:-1, :-1]) / hx
            gy = 0.5 * (u[1:, 1:] - u[1:, :-1] + u[:-1, 1:] - u[:-1, :-1]) / hy
            self._cache[k] = (gx, gy)
        return self._cache[k]

    def grad2(self, k: int, theta: float) -> np.ndarray:
        gx0, gy0 = self.level(k)
        if theta == 0.0:
            return gx0 * gx0 + gy0 * gy0
        gx1, gy1 = self.level(k + 1)
        gx = (1.0 - theta) * gx0 + theta * gx1
        gy = (1.0 - theta) * gy0 + theta * gy1
        return gx * gx + gy * gy

    def max_grad2(self, ks) -> float:
        return max(float(np.max(self.grad2(k, 0.0))) for k in ks)


def _prepare(v: SpaceTimeField) -> SpaceTimeField:
    if not v.is_reflected:
        v = reflect_even(v)
    return v


def _box(nodes: np.ndarray, radius: float, stride: int = 1) -> np.ndarray:
    tol = _SNAP * max(1.0, radius)
    idx = np.nonzero(np.abs(nodes) <= radius + tol)[0]
    if stride > 1:
        i0 = int(np.argmin(np.abs(nodes)))
        idx = idx[(idx - i0) % stride == 0]
    return idx


def _panels(t: float, times: np.ndarray, levels: int) -> np.ndarray:
    """Break points in kernel time ``tau`` on ``[0, t]``."""
    geo = t * 0.5 ** np.arange(levels + 1)
    stored = -times[(times < 0.0) & (times > -t)]
    pts = np.unique(np.concatenate([[0.0, t], geo, stored]))
    keep = np.concatenate([[True], np.diff(pts) > _SNAP * t])
    return pts[keep]


def _time_integral(cache: _GradientCache, times: np.ndarray, t: float, levels: int,
                   npts: int) -> float:
    xg, wg = leggauss(npts)
    br = _panels(t, times, levels)
    total = 0.0
    for a, b in zip(br[:-1], br[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        for xi, wi in zip(xg, wg):
            tau = mid + half * xi
            s = -tau
            k = int(np.searchsorted(times, s, side="right")) - 1
            k = min(max(k, 0), len(times) - 2)
            theta = (s - times[k]) / (times[k + 1] - times[k])
            g2 = cache.grad2(k, float(theta))
            wx = _cell_mass(cache.ex, tau)
            wy = _cell_mass(cache.ey, tau)
            total += half * wi * float(wx @ g2 @ wy)
    return total


def i_functional_estimate(v: SpaceTimeField, t: float, radius: float | None = None,
                          accuracy: float | None = None, levels: int = LEVELS,
                          estimate: bool = True) -> Quadrature:
    """``I(t, v)`` with error estimate.

    Parameters
    ----------
    v : SpaceTimeField
        Origin-centered field; a half-grid field is evenly reflected first.
    t : float
        Upper time of the integral, ``0 < t``.
    radius : float, optional
        Truncation half-width, default ``8 sqrt(t)``.
    accuracy : float, optional
        Raise :class:`TailError` if the tail bound exceeds this.
    """
    if not t > 0:
        raise DomainError(f"I needs t > 0, got {t}")
    v = _prepare(v)
    R = RC_FACTOR * np.sqrt(t) if radius is None else float(radius)
    times = v.t
    tol = _SNAP * max(1.0, t)
    if times[0] > -t + tol or not (times[0] - tol <= 0.0 <= times[-1] + tol):
        raise DomainError(f"time range [{times[0]}, {times[-1]}] does not cover [-{t}, 0]")
    for nodes, name in ((v.x1, "x1"), (v.xn, "xn")):
        if nodes[0] > -R + tol or nodes[-1] < R - tol:
            raise DomainError(f"{name} range does not cover the truncation radius {R:.4g}")
    if len(times) < 2:
        raise DomainError("need at least two time levels")
    span = (times >= -t - tol) & (times <= tol)
    ks = np.nonzero(span)[0]

    fine = _GradientCache(v, _box(v.x1, R), _box(v.xn, R))
    value = _time_integral(fine, times, t, levels, GL_POINTS)
    lip2 = fine.max_grad2(ks)
    tail = lip2 * t * np.exp(-R * R / (4.0 * t))
    if accuracy is not None and tail > accuracy:
        raise TailError(f"tail bound {tail:.3e} exceeds requested accuracy {accuracy:.3e}")

    time_err = space_err = 0.0
    if estimate:
        time_err = abs(value - _time_integral(fine, times, t, levels, GL_POINTS // 2))
        ix, jx = _box(v.x1, R, 2), _box(v.xn, R, 2)
        if len(ix) > 2 and len(jx) > 2:
            coarse = _GradientCache(v, ix, jx)
            space_err = abs(value - _time_integral(coarse, times, t, levels, GL_POINTS)) / 3.0
    return Quadrature(value, time_err + space_err + tail, time_err, space_err, tail, R)


def i_functional(v: SpaceTimeField, t: float, **kw) -> float:
    """``I(t, v)``; see :func:`i_functional_estimate`."""
    return i_functional_estimate(v, t, estimate=False, **kw).value


# ---- Phi ------------------------------------------------------------------

@dataclass
class PhiValue:
    value: float
    error: float
    i_plus: Quadrature
    i_minus: Quadrature
    violations: list[str] = field(default_factory=list)

    def __float__(self) -> float:
        return self.value


def _check_hypotheses(u1: SpaceTimeField, u2: SpaceTimeField, tol: float) -> list[str]:
    out = []
    scale = max(1.0, float(np.max(np.abs(u1.values))), float(np.max(np.abs(u2.values))))
    if u1.values.shape == u2.values.shape:
        prod = float(np.max(np.abs(u1.values * u2.values)))
        if prod > tol * scale * scale:
            out.append(f"u1*u2 not identically zero (max {prod:.3e})")
    try:
        o1 = abs(float(u1.sample(0.0, 0.0, 0.0).ravel()[0]))
        o2 = abs(float(u2.sample(0.0, 0.0, 0.0).ravel()[0]))
    except DomainExceeded:
        out.append("origin not in the field")
    else:
        if max(o1, o2) > tol * scale:
            out.append(f"fields do not vanish at the origin ({o1:.3e}, {o2:.3e})")
    return out


def subcaloric_defect(v: SpaceTimeField) -> float:
    """Most negative discrete ``Laplace v - d_t v`` over interior nodes off ``xn = 0``."""
    u = v.values
    if u.shape[0] < 2 or u.shape[1] < 3 or u.shape[2] < 3:
        return 0.0
    h1, hn = v.hx1, v.hxn
    dt = np.diff(v.t)[:, None, None]
    c = u[1:, 1:-1, 1:-1]
    lap = ((u[1:, 2:, 1:-1] - 2 * c + u[1:, :-2, 1:-1]) / h1 ** 2
           + (u[1:, 1:-1, 2:] - 2 * c + u[1:, 1:-1, :-2]) / hn ** 2)
    res = lap - (c - u[:-1, 1:-1, 1:-1]) / dt
    off = np.abs(v.xn[1:-1]) > _SNAP
    return float(min(0.0, np.min(res[:, :, off])))


def phi(u_plus: SpaceTimeField, u_minus: SpaceTimeField, t: float,
        tol: float = 1e-10, **kw) -> PhiValue:
    """``Phi(t; u_plus, u_minus)`` with propagated quadrature error.

    Violated hypotheses (disjoint supports, vanishing at the origin) emit a
    :class:`HypothesisViolation` warning and are listed on the result.
    """
    u_plus, u_minus = _prepare(u_plus), _prepare(u_minus)
    bad = _check_hypotheses(u_plus, u_minus, tol)
    for msg in bad:
        warnings.warn(msg, HypothesisViolation, stacklevel=2)
    if log.isEnabledFor(logging.DEBUG):
        log.debug("subcaloric defects: %.3e, %.3e",
                  subcaloric_defect(u_plus), subcaloric_defect(u_minus))
    ip = i_functional_estimate(u_plus, t, **kw)
    im = i_functional_estimate(u_minus, t, **kw)
    val = ip.value * im.value / (t * t)
    err = (ip.value * im.error + im.value * ip.error + ip.error * im.error) / (t * t)
    return PhiValue(val, err, ip, im, bad)


def phi_of(u: SpaceTimeField, t: float, **kw) -> PhiValue:
    """``Phi(t; u^+, u^-)`` of a single field."""
    u = _prepare(u)
    return phi(u.positive_part(), u.negative_part(), t, **kw)


def phi_rescaling_check(u: SpaceTimeField, r: float, t: float, **kw) -> tuple[float, float]:
    """``(Phi(t r^2; u+, u-), Phi(t; (u+)_r, (u-)_r))`` for an origin-centered ``u``."""
    u = _prepare(u)
    up, um = u.positive_part(), u.negative_part()
    lhs = phi(up, um, t * r * r, **kw).value
    rhs = phi(rescale(up, r), rescale(um, r), t, **kw).value
    return lhs, rhs


# ---- reports and drivers --------------------------------------------------

@dataclass
class MonotonicityReport:
    base: tuple[float, float]
    t: np.ndarray
    i_plus: np.ndarray
    i_minus: np.ndarray
    phi: np.ndarray
    error: np.ndarray
    radius: np.ndarray
    violation: float
    radii: list[float] = field(default_factory=list)
    phi_by_radius: list[float] = field(default_factory=list)
    cauchy: list[float] = field(default_factory=list)
    phi0: float | None = None

    def rows(self):
        """``(t, I+, I-, Phi, error)`` rows."""
        return list(zip(self.t.tolist(), self.i_plus.tolist(), self.i_minus.tolist(),
                        self.phi.tolist(), self.error.tolist()))

    @property
    def monotone(self) -> bool:
        """Every increment is at least minus the combined error of its endpoints."""
        d = np.diff(self.phi)
        allow = self.error[1:] + self.error[:-1]
        return bool(np.all(d >= -allow))


def _centered(u: SpaceTimeField, base) -> SpaceTimeField:
    x0, t0 = base
    u = u.translated(x0, t0)
    return _prepare(u.restrict(t_lim=(u.t[0], 0.0)))


def phi_profile(u: SpaceTimeField, base, t_samples, **kw) -> MonotonicityReport:
    """Sample ``Phi(t; u^+, u^-)`` about ``base = (x1, t)`` at increasing ``t``."""
    ts = np.asarray(sorted(t_samples), dtype=float)
    if ts.size == 0 or ts[0] <= 0 or np.any(np.diff(ts) <= 0):
        raise DomainError("t samples must be positive and distinct")
    v = _centered(u, base)
    up, um = v.positive_part(), v.negative_part()
    rows = []
    for t in ts:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", HypothesisViolation)
            pv = phi(up, um, float(t), **kw)
        for w in caught:
            log.info("t=%g: %s", t, w.message)
        rows.append((pv.i_plus.value, pv.i_minus.value, pv.value, pv.error,
                     pv.i_plus.radius))
    ip, im, ph, er, rc = (np.array(c) for c in zip(*rows))
    viol = float(max(0.0, -np.min(np.diff(ph)))) if len(ph) > 1 else 0.0
    return MonotonicityReport(tuple(base), ts, ip, im, ph, er, rc, viol)


def max_phi_time(u: SpaceTimeField, base) -> float:
    """Largest ``t`` for which ``I(t)`` about ``base`` fits in the stored data."""
    x0, t0 = base
    d = min(x0 - u.x1[0], u.x1[-1] - x0, u.xn[-1])
    return float(min((d / RC_FACTOR) ** 2, t0 - u.t[0]))


def _aitken(x: list[float]) -> float:
    if len(x) < 3:
        return x[-1]
    a, b, c = x[-3:]
    den = (c - b) - (b - a)
    if abs(den) <= 1e-14 * max(1.0, abs(c)):
        return c
    acc = c - (c - b) ** 2 / den
    # only trust the acceleration when the sequence is contracting
    return acc if abs(c - b) < abs(b - a) else c


def blowup_drive(u: SpaceTimeField, base, radii, t_samples=(0.0625, 0.125, 0.25, 0.5, 1.0),
                 **kw) -> MonotonicityReport:
    """Phi along the parabolic rescalings ``u_r`` about ``base = (x1, t)``.

    For each ``r`` the rescaled field is built on its natural grid and Phi is
    sampled at ``t_samples``; the report carries the samples of the last
    (smallest) ``r``, ``Phi(1; u_r) = Phi(r^2; u)`` per radius, their Cauchy
    increments and an Aitken-extrapolated ``Phi(0+)``.
    """
    rs = [float(r) for r in radii]
    if any(r <= 0 for r in rs) or any(b >= a for a, b in zip(rs, rs[1:])):
        raise DomainError("radii must be positive and strictly decreasing")
    x0, t0 = base
    tr = u.trace()
    if u.is_reflected:
        raise DomainError("blowup_drive expects a half-grid field")
    k0 = int(np.argmin(np.abs(u.t - t0)))
    i0 = int(np.argmin(np.abs(u.x1 - x0)))
    if abs(tr[k0, i0]) > 1e-8 * max(1.0, float(np.max(np.abs(tr)))):
        log.warning("base trace %.3e is not zero", tr[k0, i0])
    v = _centered(u, base)
    tmax = max(t_samples)
    per_r, report = [], None
    for r in rs:
        R = RC_FACTOR * np.sqrt(tmax) * r
        if (-v.x1[0] < R - _SNAP or v.x1[-1] < R - _SNAP or v.xn[-1] < R - _SNAP
                or -v.t[0] < tmax * r * r - _SNAP):
            raise DomainExceeded(f"rescaling r={r:g} needs the window |x| <= {R:.4g}, "
                                 f"t >= {-tmax * r * r:.4g}")
        vr = rescale(v, r)
        report = phi_profile(vr, (0.0, 0.0), t_samples, **kw)
        per_r.append(float(report.phi[-1]))
    report.base = (float(x0), float(t0))
    report.radii = rs
    report.phi_by_radius = per_r
    report.cauchy = [abs(b - a) for a, b in zip(per_r, per_r[1:])]
    report.phi0 = max(0.0, _aitken(per_r))
    return report
