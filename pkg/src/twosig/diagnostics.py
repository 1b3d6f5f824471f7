"""Measurements on solver and oracle fields: complementarity on the thin
line, growth at free-boundary points, Hoelder seminorms, comparison and
collapse experiments, energy monitors and the time-oscillation bound.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ProbeError
from .geometry import HalfGrid, ParabolicCylinder, SpaceTimeField
from .penalty import PenaltyParams, b_value
from .stepper import ProblemData, dirichlet_mask, run

log = logging.getLogger(__name__)

_SNAP = 1e-9


# ---- complementarity ------------------------------------------------------

def discrete_flux(u: SpaceTimeField, alpha: float = 0.0, f=None) -> np.ndarray:
    """Thin-line flux ``du/dxn`` with the solver's folded one-sided stencil.

    Returns shape ``(len(t) - 1, len(x1) - 2)``: slices ``k >= 1`` and
    thin nodes off the lateral boundary.  ``f`` is an optional source
    callable ``f(x1, xn, t)`` (used only when ``alpha > 0``).
    """
    v = u.values
    j = u.thin_index
    hn = u.xn[j + 1] - u.xn[j]
    fl = (v[1:, 1:-1, j + 1] - v[1:, 1:-1, j]) / hn
    if alpha:
        h1 = u.hx1
        dt = np.diff(u.t)[:, None]
        u0 = v[1:, :, j]
        d11 = (u0[:, 2:] - 2 * u0[:, 1:-1] + u0[:, :-2]) / h1 ** 2
        mid = (u0[:, 1:-1] - v[:-1, 1:-1, j]) / dt - d11
        if f is not None:
            T, X = np.meshgrid(u.t[1:], u.x1[1:-1], indexing="ij")
            mid = mid + f(X, 0.0 * X, T)
        fl = fl - alpha * hn * mid
    return fl


def complementarity_violation(trace, flux, p: PenaltyParams, sigma: float) -> np.ndarray:
    """Pointwise violation of the sign/flux pairing on the thin line."""
    trace = np.asarray(trace, dtype=float)
    flux = np.asarray(flux, dtype=float)
    lp, lm = p.lambda_plus, p.lambda_minus
    band = np.maximum(flux - lp, 0.0) + np.maximum(-lm - flux, 0.0)
    return np.where(trace > sigma, np.abs(flux - lp),
                    np.where(trace < -sigma, np.abs(flux + lm), band))


@dataclass
class ComplementarityReport:
    violation: np.ndarray          # (slices, interior thin nodes)
    flux: np.ndarray
    x1: np.ndarray
    t: np.ndarray
    sigma: float
    collar_mask: np.ndarray        # True where a node is within the collar of a sign change

    @property
    def max(self) -> float:
        return float(np.max(self.violation, initial=0.0))

    @property
    def max_off_collar(self) -> float:
        v = self.violation[~self.collar_mask]
        return float(np.max(v, initial=0.0))

    @property
    def argmax(self) -> tuple[float, float]:
        k, i = np.unravel_index(int(np.argmax(self.violation)), self.violation.shape)
        return float(self.t[k]), float(self.x1[i])


def complementarity_residual(u: SpaceTimeField, p: PenaltyParams, sigma: float | None = None,
                             alpha: float = 0.0, f=None, collar: int = 1) -> ComplementarityReport:
    """Per-node complementarity violation on slices ``k >= 1``.

    ``collar`` is the number of nodes on each side of a change of the
    sign indicator that are flagged in ``collar_mask``.
    """
    tr = u.trace()[1:, 1:-1]
    if sigma is None:
        sigma = 10.0 * np.finfo(float).eps * float(np.max(np.abs(u.trace()), initial=0.0))
    fl = discrete_flux(u, alpha, f)
    viol = complementarity_violation(tr, fl, p, sigma)
    sign = np.where(tr > sigma, 1, np.where(tr < -sigma, -1, 0))
    change = np.zeros_like(sign, dtype=bool)
    edge = sign[:, 1:] != sign[:, :-1]
    change[:, 1:] |= edge
    change[:, :-1] |= edge
    mask = change.copy()
    for s in range(1, collar):
        mask[:, s:] |= change[:, :-s]
        mask[:, :-s] |= change[:, s:]
    return ComplementarityReport(viol, fl, u.x1[1:-1], u.t[1:], float(sigma), mask)


# ---- nondegeneracy ---------------------------------------------------------

@dataclass
class GrowthProbe:
    base: tuple[float, float]
    radii: np.ndarray
    values: np.ndarray             # sup u (Gamma+) or sup -u (Gamma-) over the boundary
    slope: float
    constant: float
    phase: str = "+"
    kinds: list[str] = field(default_factory=list)


def _boundary_nodes(u: SpaceTimeField, base, r: float, kind: str):
    """Time levels, ball mask and lateral-boundary mask of the cylinder."""
    x0, t0 = base
    tol = _SNAP * max(1.0, r)
    lo = t0 - r * r
    hi = t0 + r * r if kind == "full" else t0
    ks = np.nonzero((u.t >= lo - tol) & (u.t <= hi + tol))[0]
    # prepend the mirror row xn = -xn[1] so the thin line has both neighbours
    xn = np.concatenate([[-u.xn[1]], u.xn])
    X1, XN = np.meshgrid(u.x1, xn, indexing="ij")
    inside = (X1 - x0) ** 2 + XN ** 2 <= r * r * (1 + 1e-12) + tol
    pad = np.pad(inside, 1, constant_values=False)
    interior = pad[:-2, 1:-1] & pad[2:, 1:-1] & pad[1:-1, :-2] & pad[1:-1, 2:]
    lateral = inside & ~interior
    return ks, inside[:, 1:], lateral[:, 1:]


def growth_probe(u: SpaceTimeField, base, radii, phase: str = "+", kind: str = "auto",
                 min_cells: int = 4) -> GrowthProbe:
    """Growth of ``sup_{dp Q_r(base)} u^{+/-}`` over ``radii``.

    ``kind`` is ``"full"`` (symmetric-in-time cylinder), ``"past"`` or
    ``"auto"`` (full where it fits in the stored time range, else past).
    """
    if u.is_reflected:
        raise ProbeError("growth_probe expects a half-grid field")
    if not np.any(u.values):
        raise ProbeError("field vanishes identically: no free boundary to anchor")
    rs = np.asarray(sorted(radii, reverse=True), dtype=float)
    if rs.size < 2 or np.any(np.diff(rs) >= 0):
        raise ProbeError("need at least two distinct radii")
    x0, t0 = base
    h = max(u.hx1, u.hxn)
    sgn = 1.0 if phase == "+" else -1.0
    vals, kinds = [], []
    for r in rs:
        if r < min_cells * h * (1 - 1e-9):
            raise ProbeError(f"radius {r:g} resolves fewer than {min_cells} cells")
        k_full = t0 + r * r <= u.t[-1] + _SNAP
        kd = kind if kind != "auto" else ("full" if k_full else "past")
        if (x0 - r < u.x1[0] - _SNAP or x0 + r > u.x1[-1] + _SNAP or r > u.xn[-1] + _SNAP
                or t0 - r * r < u.t[0] - _SNAP or (kd == "full" and not k_full)):
            raise ProbeError(f"cylinder of radius {r:g} at {base} exits the domain")
        ks, inside, lateral = _boundary_nodes(u, base, r, kd)
        if ks.size == 0:
            raise ProbeError(f"no time levels in cylinder of radius {r:g}")
        w = sgn * u.values[ks]
        side = np.max(np.where(lateral[None], w, -np.inf))
        bottom = np.max(np.where(inside, w[0], -np.inf))
        vals.append(max(float(side), float(bottom)))
        kinds.append(kd)
    vals = np.asarray(vals)
    if np.any(vals <= 0):
        raise ProbeError("nonpositive sup on a probe cylinder: degenerate point")
    slope, icpt = np.polyfit(np.log(rs), np.log(vals), 1)
    return GrowthProbe((float(x0), float(t0)), rs, vals, float(slope), float(np.exp(icpt)),
                       phase, kinds)


# ---- Hoelder seminorms -------------------------------------------------------

@dataclass
class RegularityReport:
    order: tuple[float, float]
    value: float                   # max of the two parts
    space: float                   # space part (u or gradient quotient)
    time: float                    # time part of u
    window: ParabolicCylinder | None
    pairs: int
    argmax: tuple                  # the two points attaining ``value``


def _window_mask(x1, xn, t, window):
    T, X1, XN = np.meshgrid(t, x1, xn, indexing="ij")
    if window is None:
        return np.ones(T.shape, dtype=bool)
    return window.contains(X1, XN, T)


def _cell_gradients(u: SpaceTimeField):
    v = u.values
    hx = np.diff(u.x1)[None, :, None]
    hy = np.diff(u.xn)[None, None, :]
    gx = 0.5 * (v[:, 1:, 1:] - v[:, :-1, 1:] + v[:, 1:, :-1] - v[:, :-1, :-1]) / hx
    gy = 0.5 * (v[:, 1:, 1:] - v[:, 1:, :-1] + v[:, :-1, 1:] - v[:, :-1, :-1]) / hy
    cx = 0.5 * (u.x1[1:] + u.x1[:-1])
    cy = 0.5 * (u.xn[1:] + u.xn[:-1])
    return np.stack([gx, gy], axis=-1), cx, cy


class _PairSup:
    """Running sup of a quotient over pair batches."""

    def __init__(self):
        self.best, self.arg, self.count = 0.0, None, 0

    def add(self, q, pa, pb):
        if q.size == 0:
            return
        self.count += q.size
        m = int(np.argmax(q))
        if q[m] > self.best:
            self.best = float(q[m])
            self.arg = (tuple(float(x) for x in pa[m]), tuple(float(x) for x in pb[m]))


def _pairs(shape, mask, stencil, rng, n_random, same_time=False, same_space=False):
    """Flat index pairs: stencil offsets, seeded random pairs, first/last time pairs."""
    nt, n1, n2 = shape
    idx = np.nonzero(mask.ravel())[0]
    K, I, J = np.unravel_index(idx, shape)
    out_a, out_b = [], []
    rk = range(0, stencil + 1) if not same_time else range(1)
    rs = range(-stencil, stencil + 1) if not same_space else range(1)
    for dk in rk:
        for di in rs:
            for dj in rs:
                if dk == 0 and (di, dj) <= (0, 0):
                    continue
                if same_space and dk == 0:
                    continue
                k2, i2, j2 = K + dk, I + di, J + dj
                ok = (k2 < nt) & (i2 >= 0) & (i2 < n1) & (j2 >= 0) & (j2 < n2)
                b = np.ravel_multi_index((k2[ok], i2[ok], j2[ok]), shape)
                keep = mask.ravel()[b]
                out_a.append(idx[ok][keep])
                out_b.append(b[keep])
    if same_space:
        # extreme time gap at every node
        sel = mask.any(axis=0)
        ks = np.nonzero(mask.any(axis=(1, 2)))[0]
        if ks.size > 1:
            ii, jj = np.nonzero(sel)
            a = np.ravel_multi_index((np.full(ii.size, ks[0]), ii, jj), shape)
            b = np.ravel_multi_index((np.full(ii.size, ks[-1]), ii, jj), shape)
            ok = mask.ravel()[a] & mask.ravel()[b]
            out_a.append(a[ok])
            out_b.append(b[ok])
    if n_random and idx.size > 1:
        a = idx[rng.integers(0, idx.size, n_random)]
        b = idx[rng.integers(0, idx.size, n_random)]
        if same_time or same_space:
            ka, ia, ja = np.unravel_index(a, shape)
            kb, ib, jb = np.unravel_index(b, shape)
            if same_time:
                b = np.ravel_multi_index((ka, ib, jb), shape)
            else:
                b = np.ravel_multi_index((kb, ia, ja), shape)
            ok = mask.ravel()[b]
            a, b = a[ok], b[ok]
        out_a.append(a)
        out_b.append(b)
    a = np.concatenate(out_a) if out_a else np.zeros(0, int)
    b = np.concatenate(out_b) if out_b else np.zeros(0, int)
    keep = a != b
    return a[keep], b[keep]


def holder_seminorms(u: SpaceTimeField, window: ParabolicCylinder | None = None,
                     order=(1.0, 0.5), seed: int = 0, n_random: int = 10_000,
                     stencil: int = 2) -> RegularityReport:
    """Sampled parabolic Hoelder seminorms of ``u`` over ``window``.

    ``order = (1, 1/2)``: ``|u(p) - u(q)| / |x - y|`` over equal-time pairs
    and ``|u(x, t) - u(x, s)| / |t - s|^(1/2)``.

    ``order = (a, a/2)`` with ``1 < a < 2``: ``|grad u(p) - grad u(q)| /
    d_p(p, q)^(a - 1)`` over space-time pairs of cell-center gradients and
    ``|u(x, t) - u(x, s)| / |t - s|^(a/2)``.
    """
    a, b = float(order[0]), float(order[1])
    rng = np.random.default_rng(seed)
    shape = u.values.shape
    tt, xx, yy = np.meshgrid(u.t, u.x1, u.xn, indexing="ij")
    P = np.stack([xx.ravel(), yy.ravel(), tt.ravel()], axis=1)
    flat = u.values.ravel()
    mask = _window_mask(u.x1, u.xn, u.t, window)

    tpart = _PairSup()
    ia, ib = _pairs(shape, mask, stencil, rng, n_random, same_space=True)
    dt = np.abs(P[ia, 2] - P[ib, 2])
    ok = dt > 0
    tpart.add(np.abs(flat[ia] - flat[ib])[ok] / dt[ok] ** b, P[ia][ok], P[ib][ok])

    spart = _PairSup()
    if a <= 1.0 + 1e-12:
        ia, ib = _pairs(shape, mask, stencil, rng, n_random, same_time=True)
        dx = np.hypot(P[ia, 0] - P[ib, 0], P[ia, 1] - P[ib, 1])
        ok = dx > 0
        spart.add(np.abs(flat[ia] - flat[ib])[ok] / dx[ok], P[ia][ok], P[ib][ok])
    else:
        g, cx, cy = _cell_gradients(u)
        gshape = g.shape[:3]
        tc, xc, yc = np.meshgrid(u.t, cx, cy, indexing="ij")
        Pc = np.stack([xc.ravel(), yc.ravel(), tc.ravel()], axis=1)
        gm = _window_mask(cx, cy, u.t, window)
        G = g.reshape(-1, 2)
        ia, ib = _pairs(gshape, gm, stencil, rng, n_random)
        d = np.maximum(np.hypot(Pc[ia, 0] - Pc[ib, 0], Pc[ia, 1] - Pc[ib, 1]),
                       np.sqrt(np.abs(Pc[ia, 2] - Pc[ib, 2])))
        ok = d > 0
        diff = np.linalg.norm(G[ia] - G[ib], axis=1)
        spart.add(diff[ok] / d[ok] ** (a - 1.0), Pc[ia][ok], Pc[ib][ok])
    best = spart if spart.best >= tpart.best else tpart
    return RegularityReport((a, b), max(spart.best, tpart.best), spart.best, tpart.best,
                            window, spart.count + tpart.count, best.arg)


# ---- comparison and collapse -------------------------------------------------

def comparison_test(data1: ProblemData, data2: ProblemData, grid: HalfGrid,
                    mode: str = "direct", check_order: bool = True, **opts) -> float:
    """``max (u1 - u2)^+`` for data ordered on the parabolic boundary."""
    if check_order:
        mask = dirichlet_mask(grid)
        if np.any(data1.initial(grid) > data2.initial(grid) + 1e-14):
            raise ConfigError("initial data are not ordered")
        for t in grid.t[1:]:
            if np.any(data1.boundary(grid, t)[mask] > data2.boundary(grid, t)[mask] + 1e-14):
                raise ConfigError(f"boundary data are not ordered at t={t:g}")
    u1 = run(data1, grid, mode, **opts).field
    u2 = run(data2, grid, mode, **opts).field
    return float(np.max(np.maximum(u1.values - u2.values, 0.0)))


def constant_data(delta: float, p: PenaltyParams) -> ProblemData:
    return ProblemData(p, lambda x1, xn, t: delta + 0.0 * (x1 + xn + t),
                       label=f"constant{delta:g}")


def inner_thin_window(u: SpaceTimeField, radius: float = 0.5) -> np.ndarray:
    """Trace restricted to ``|x1| < radius``, ``t > t_end - radius^2``."""
    tr = u.trace()
    ti = u.t > u.t[-1] - radius * radius + _SNAP
    xi = np.abs(u.x1) < radius - _SNAP
    return tr[np.ix_(ti, xi)]


def collapse_experiment(delta: float, grid: HalfGrid, p: PenaltyParams,
                        tol: float | None = None, solver_tol: float = 1e-10,
                        **opts) -> tuple[bool, float]:
    """Run constant data ``delta`` and test whether the inner trace vanishes."""
    tol = 10.0 * solver_tol if tol is None else tol
    u = run(constant_data(delta, p), grid, "direct", tol=solver_tol, **opts).field
    m = float(np.max(np.abs(inner_thin_window(u)), initial=0.0))
    return m <= tol, m


def collapse_sweep(deltas, grid: HalfGrid, p: PenaltyParams, **kw):
    """Table of ``(delta, collapsed, max trace)`` and the threshold estimate.

    The threshold is the largest swept ``delta`` below which every swept
    value collapsed (0 if the smallest did not).
    """
    rows = [(float(d),) + collapse_experiment(float(d), grid, p, **kw)
            for d in sorted(deltas)]
    star = 0.0
    for d, ok, _ in rows:
        if not ok:
            break
        star = d
    return rows, star


# ---- energy, oscillation, variational checks ---------------------------------

def _trap_weights(c: np.ndarray) -> np.ndarray:
    w = np.zeros_like(c)
    d = np.diff(c)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


@dataclass
class EnergyMonitors:
    e1: float                      # sup_t |u|^2 + int |grad u|^2
    e2: float                      # sup_t |grad u|^2 + int |d_t u|^2
    data1: float                   # data norms bounding e1
    data2: float                   # data norms bounding e2


def energy_monitors(u: SpaceTimeField, data: ProblemData | None = None,
                    grid: HalfGrid | None = None) -> EnergyMonitors:
    """Discrete versions of the two global energy estimates on the half domain."""
    v = u.values
    wx = _trap_weights(u.x1)[:, None] * _trap_weights(u.xn)[None, :]
    l2 = np.einsum("kij,ij->k", v * v, wx)
    g, _, _ = _cell_gradients(u)
    cell = np.diff(u.x1)[:, None] * np.diff(u.xn)[None, :]
    grad2 = np.einsum("kij,ij->k", np.sum(g * g, axis=-1), cell)
    dt = np.diff(u.t)
    # backward differences in time: the scheme's own d_t
    ut2 = np.einsum("kij,ij->k", ((v[1:] - v[:-1]) / dt[:, None, None]) ** 2, wx)
    e1 = float(np.max(l2) + np.sum(grad2[1:] * dt))
    e2 = float(np.max(grad2) + np.sum(ut2 * dt))
    d1 = d2 = float("nan")
    if data is not None:
        grid = grid if grid is not None else u.grid
        d1, d2 = data_norms(data, grid)
    return EnergyMonitors(e1, e2, d1, d2)


def data_norms(data: ProblemData, grid: HalfGrid) -> tuple[float, float]:
    """Discrete right-hand sides of the two energy estimates (constants dropped)."""
    x1, xn, t = grid.x1, grid.xn, grid.t
    G = np.stack([data.boundary(grid, s) for s in t])
    F = np.stack([data.source(grid, s) for s in t])
    phi0 = data.initial(grid)
    fld = SpaceTimeField(x1, xn, t, G)
    wx = _trap_weights(x1)[:, None] * _trap_weights(xn)[None, :]
    wt = _trap_weights(t)
    g_grad, _, _ = _cell_gradients(fld)
    cell = np.diff(x1)[:, None] * np.diff(xn)[None, :]
    gt = np.gradient(G, t, axis=0)
    gtt = np.einsum("kij,ij->k", gt * gt, wx) @ wt
    gt_grad, _, _ = _cell_gradients(SpaceTimeField(x1, xn, t, gt))
    gt_grad2 = np.einsum("kij,ij->k", np.sum(gt_grad ** 2, axis=-1), cell) @ wt
    g_l2 = np.einsum("kij,ij->k", G * G, wx) @ wt
    g_grad2 = np.einsum("kij,ij->k", np.sum(g_grad ** 2, axis=-1), cell) @ wt
    d11 = np.gradient(np.gradient(G, x1, axis=1), x1, axis=1)
    dnn = np.gradient(np.gradient(G, xn, axis=2), xn, axis=2)
    g_hess = np.einsum("kij,ij->k", d11 ** 2 + dnn ** 2, wx) @ wt
    f2 = np.einsum("kij,ij->k", F * F, wx) @ wt
    gt_thin = (gt[:, :, 0] ** 2 @ _trap_weights(x1)) @ wt
    p0, _, _ = _cell_gradients(SpaceTimeField(x1, xn, t[:1], phi0[None]))
    phi_l2 = float(np.sum(phi0 * phi0 * wx))
    phi_grad2 = float(np.sum(np.sum(p0[0] ** 2, axis=-1) * cell))
    w21 = np.sqrt(g_l2 + g_grad2 + g_hess + gtt)
    d1 = phi_l2 + w21 + np.sqrt(f2)
    d2 = phi_grad2 + np.sqrt(gtt + gt_grad2) + np.sqrt(gt_thin) + np.sqrt(f2)
    return float(d1), float(d2)


def spatial_lipschitz(u: SpaceTimeField, x1_lim=None, xn_lim=None) -> float:
    """Largest cell-center gradient norm (optionally over a sub-box)."""
    v = u.restrict(x1_lim, xn_lim) if (x1_lim or xn_lim) else u
    g, _, _ = _cell_gradients(v)
    return float(np.max(np.linalg.norm(g, axis=-1)))


@dataclass
class OscillationReport:
    ratio: float                   # max of observed / bound over thin pairs
    lipschitz: float
    pairs: int
    worst: tuple


def time_oscillation_check(u: SpaceTimeField, p: PenaltyParams, lipschitz: float | None = None,
                           x1_lim=(-0.5, 0.5), max_lag: int | None = None) -> OscillationReport:
    """``|u(x0, t1) - u(x0, t0)| / (2 (L + Lambda) |t1 - t0|^(1/2))`` on thin nodes."""
    L = spatial_lipschitz(u) if lipschitz is None else lipschitz
    tr = u.trace()
    sel = np.nonzero((u.x1 >= x1_lim[0] - _SNAP) & (u.x1 <= x1_lim[1] + _SNAP))[0]
    tr = tr[:, sel]
    nt = tr.shape[0]
    max_lag = nt - 1 if max_lag is None else min(max_lag, nt - 1)
    bound_c = 2.0 * (L + p.Lambda)
    worst, arg, count = 0.0, None, 0
    for lag in range(1, max_lag + 1):
        d = np.abs(tr[lag:] - tr[:-lag])
        gap = np.sqrt(np.abs(u.t[lag:] - u.t[:-lag]))[:, None]
        q = d / (bound_c * gap)
        count += q.size
        m = np.unravel_index(int(np.argmax(q)), q.shape)
        if q[m] > worst:
            worst = float(q[m])
            arg = (float(u.x1[sel[m[1]]]), float(u.t[m[0]]), float(u.t[m[0] + lag]))
    return OscillationReport(worst, L, count, arg)


def caloric_residual(u: SpaceTimeField, f=None) -> np.ndarray:
    """Discrete ``d_t u - Laplace u + f`` at interior nodes (xn > 0), slices ``k >= 1``."""
    v = u.values
    j0 = u.thin_index
    c = v[1:, 1:-1, j0 + 1:-1]
    lap = ((v[1:, 2:, j0 + 1:-1] - 2 * c + v[1:, :-2, j0 + 1:-1]) / u.hx1 ** 2
           + (v[1:, 1:-1, j0 + 2:] - 2 * c + v[1:, 1:-1, j0:-2]) / u.hxn ** 2)
    res = (c - v[:-1, 1:-1, j0 + 1:-1]) / np.diff(u.t)[:, None, None] - lap
    if f is not None:
        T, X1, XN = np.meshgrid(u.t[1:], u.x1[1:-1], u.xn[j0 + 1:-1], indexing="ij")
        res = res + f(X1, XN, T)
    return res


def vi_check(u: SpaceTimeField, p: PenaltyParams, k: int, n_tests: int = 100,
             seed: int = 0, scale: float = 1.0, f=None, dt: float | None = None,
             flux_order: int = 1) -> float:
    """Smallest per-step variational-inequality gap over random admissible tests.

    For slice ``k`` the discrete inequality

        sum_I hxn [ (u - u_prev)/dt (w - u) + f (w - u) ]
        + <grad_h u, grad_h (w - u)> + sum_thin [B(w) - B(u)] >= 0

    (scaled by ``1/hx1``, as in the solver's per-step energy)

    is evaluated for ``w = u + z`` with random ``z`` vanishing on the Dirichlet
    boundary.  A nonnegative return value means every test passed.
    """
    if u.grid is None:
        raise ConfigError("vi_check needs a field carrying its grid")
    from .stepper import assemble_step_operator

    grid = u.grid
    op = assemble_step_operator(grid, dt, flux_order)
    H = op.hessian
    m = op.n_thin
    unk = op.unknowns
    cur = u.values[k].ravel()
    g_slice = cur.reshape(grid.shape).copy()
    f_slice = (np.zeros(grid.shape) if f is None
               else f(*np.meshgrid(grid.x1, grid.xn, indexing="ij"), grid.t[k]))
    c = op.weights * op.rhs(u.values[k - 1], g_slice, f_slice)
    x = cur[unk]
    rng = np.random.default_rng(seed)
    base_lin = H @ x - c
    worst = np.inf
    for _ in range(n_tests):
        z = scale * rng.standard_normal(x.size)
        w = x + z
        val = base_lin @ z + float(np.sum(b_value(w[:m], p) - b_value(x[:m], p)))
        worst = min(worst, val)
    return float(worst)
