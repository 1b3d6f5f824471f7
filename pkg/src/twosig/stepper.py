"""Backward-Euler time stepping for the penalized problem and for the
variational inequality itself.

Each implicit step is an M-matrix problem on the unknown nodes (everything
except the lateral and top Dirichlet boundary).  The interior nodes enter
linearly, so they are eliminated exactly through a Schur complement onto
the thin line; the remaining small dense problem

    S s + xi = b,   xi = beta_eps(s)        (penalized mode)
    S s + xi = b,   xi in dB(s)             (direct mode)

is solved by semismooth Newton or by projected SOR whose thin updates are
``prox_b``.  Interior values are then recovered with one sparse solve.

Thin rows use the folded one-sided flux

    (u0 - u1)/hxn + alpha hxn [(u0 - u_prev)/dt - D11 u0 + f] + xi = 0,

with ``alpha = 0`` (first order, default) or ``alpha = 1/2`` (second order).
Rows are scaled by the node weights (``hxn`` interior, ``1`` thin) so the
system matrix is the symmetric Hessian of the per-step energy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numba import njit

from .errors import ConfigError, NonConvergence
from .geometry import HalfGrid, SpaceTimeField
from .penalty import (
    PenaltyParams,
    b_eps_value,
    b_value,
    beta_eps,
    beta_eps_slope,
)

log = logging.getLogger(__name__)

MODES = ("penalized", "direct")
NEWTON_CAP = 50
SWEEP_CAP = 10_000


@dataclass
class ProblemData:
    """Source ``f``, Dirichlet data ``g`` and initial data ``phi0``.

    All three are vectorized callables: ``g(x1, xn, t)``, ``phi0(x1, xn)``
    and ``f(x1, xn, t)``.  ``phi0`` defaults to ``g(., ., t0)`` and ``f`` to 0.
    """

    penalty: PenaltyParams
    g: Callable
    phi0: Callable | None = None
    f: Callable | None = None
    label: str = ""

    def initial(self, grid: HalfGrid) -> np.ndarray:
        X1, XN = np.meshgrid(grid.x1, grid.xn, indexing="ij")
        if self.phi0 is None:
            v = self.g(X1, XN, np.full_like(X1, grid.t_range[0]))
        else:
            v = self.phi0(X1, XN)
        return np.array(np.broadcast_to(np.asarray(v, dtype=float), X1.shape))

    def boundary(self, grid: HalfGrid, t: float) -> np.ndarray:
        X1, XN = np.meshgrid(grid.x1, grid.xn, indexing="ij")
        v = self.g(X1, XN, np.full_like(X1, t))
        return np.array(np.broadcast_to(np.asarray(v, dtype=float), X1.shape))

    def source(self, grid: HalfGrid, t: float) -> np.ndarray:
        if self.f is None:
            return np.zeros(grid.shape)
        X1, XN = np.meshgrid(grid.x1, grid.xn, indexing="ij")
        v = self.f(X1, XN, np.full_like(X1, t))
        return np.array(np.broadcast_to(np.asarray(v, dtype=float), X1.shape))

    def check(self, grid: HalfGrid, tol: float = 1e-8) -> None:
        """Finite data and corner compatibility of ``g`` and ``phi0``."""
        u0 = self.initial(grid)
        g0 = self.boundary(grid, grid.t_range[0])
        src = self.source(grid, grid.t_range[1])
        if not (np.all(np.isfinite(u0)) and np.all(np.isfinite(g0))
                and np.all(np.isfinite(src))):
            raise ConfigError("problem data must be finite")
        mask = dirichlet_mask(grid)
        gap = np.max(np.abs(u0[mask] - g0[mask]))
        if gap > tol * max(1.0, np.max(np.abs(g0))):
            raise ConfigError(f"phi0 and g incompatible on the boundary (gap {gap:.3e})")


@dataclass
class StepReport:
    time_index: int
    mode: str
    iterations: int
    residual: float
    method: str = ""
    epsilon: float | None = None
    energy: float = float("nan")


def dirichlet_mask(grid: HalfGrid) -> np.ndarray:
    """Lateral and top boundary nodes (the thin line is not Dirichlet)."""
    m = np.zeros(grid.shape, dtype=bool)
    m[0, :] = m[-1, :] = True
    m[:, -1] = True
    return m


@dataclass
class StepOperator:
    """Sparse description of one backward-Euler step on ``grid``.

    ``matrix`` holds the strong-form rows ``(I/dt - Lap_h)`` (interior) and the
    folded flux rows (thin) over the unknowns, ordered thin nodes first.
    ``boundary`` maps Dirichlet node values into the same rows.
    """

    grid: HalfGrid
    dt: float
    alpha: float
    unknowns: np.ndarray          # flat node indices, thin first
    n_thin: int
    matrix: sp.csr_matrix
    boundary: sp.csr_matrix       # rows: unknowns, cols: all nodes
    weights: np.ndarray
    mass: np.ndarray              # coefficient of u_prev in the rhs
    source_coef: np.ndarray       # coefficient of f in the rhs
    _schur: dict = field(default_factory=dict, repr=False)

    @property
    def hessian(self) -> sp.csr_matrix:
        return (sp.diags(self.weights) @ self.matrix).tocsr()

    def rhs(self, u_prev: np.ndarray, g_slice: np.ndarray, f_slice: np.ndarray) -> np.ndarray:
        """Strong-form right-hand side; Dirichlet values taken from ``g_slice``."""
        prev = u_prev.ravel()[self.unknowns]
        src = f_slice.ravel()[self.unknowns]
        gb = np.where(dirichlet_mask(self.grid), g_slice, 0.0).ravel()
        return self.mass * prev + self.source_coef * src - self.boundary @ gb

    def linear_residual(self, u_new, u_prev, f_slice=None) -> np.ndarray:
        """Strong-form residual of the linear part (no thin nonlinearity),
        reshaped onto the grid with zeros at Dirichlet nodes."""
        if f_slice is None:
            f_slice = np.zeros(self.grid.shape)
        r = self.matrix @ u_new.ravel()[self.unknowns] - self.rhs(u_prev, u_new, f_slice)
        out = np.zeros(self.grid.nx1 * self.grid.nxn)
        out[self.unknowns] = r
        return out.reshape(self.grid.shape)

    def schur(self) -> dict:
        """Factorized interior block and the dense thin Schur complement."""
        if not self._schur:
            H = self.hessian
            m = self.n_thin
            H_TT = H[:m, :m].toarray()
            H_TI = H[:m, m:].tocsr()
            H_IT = H[m:, :m].tocsc()
            lu = spla.splu(H[m:, m:].tocsc())
            Z = lu.solve(H_IT.toarray())
            S = H_TT - H_TI @ Z
            S = 0.5 * (S + S.T)
            self._schur.update(lu=lu, H_TI=H_TI, H_IT=H_IT, S=np.ascontiguousarray(S))
        return self._schur


def assemble_step_operator(grid: HalfGrid, dt: float | None = None,
                           flux_order: int = 1) -> StepOperator:
    """Assemble the backward-Euler step operator.

    ``dt = inf`` gives the steady (elliptic) operator.
    """
    dt = grid.dt if dt is None else dt
    if not dt > 0:
        raise ConfigError(f"time step must be positive, got {dt}")
    if flux_order not in (1, 2):
        raise ConfigError("flux_order must be 1 or 2")
    alpha = 0.0 if flux_order == 1 else 0.5
    nx1, nxn = grid.shape
    h1, hn = grid.hx1, grid.hxn
    inv_dt = 0.0 if np.isinf(dt) else 1.0 / dt

    I, J = np.meshgrid(np.arange(nx1), np.arange(nxn), indexing="ij")
    unknown = ~dirichlet_mask(grid)
    thin = unknown & (J == 0)
    inner = unknown & (J > 0)
    flat = lambda i, j: i * nxn + j  # noqa: E731
    unknowns = np.concatenate([flat(I[thin], J[thin]), flat(I[inner], J[inner])])
    n_thin = int(thin.sum())
    row_of = np.full(nx1 * nxn, -1)
    row_of[unknowns] = np.arange(len(unknowns))

    rows, cols, vals = [], [], []

    def add(mask, di, dj, coef):
        i, j = I[mask], J[mask]
        rows.append(row_of[flat(i, j)])
        cols.append(flat(i + di, j + dj))
        vals.append(np.full(i.shape, coef, dtype=float))

    add(inner, 0, 0, inv_dt + 2.0 / h1 ** 2 + 2.0 / hn ** 2)
    for di, dj, c in ((1, 0, h1), (-1, 0, h1), (0, 1, hn), (0, -1, hn)):
        add(inner, di, dj, -1.0 / c ** 2)
    add(thin, 0, 0, 1.0 / hn + alpha * hn * (inv_dt + 2.0 / h1 ** 2))
    add(thin, 0, 1, -1.0 / hn)
    if alpha:
        add(thin, 1, 0, -alpha * hn / h1 ** 2)
        add(thin, -1, 0, -alpha * hn / h1 ** 2)

    rows, cols, vals = (np.concatenate(v) for v in (rows, cols, vals))
    full = sp.csr_matrix((vals, (rows, cols)), shape=(len(unknowns), nx1 * nxn))
    matrix = full[:, unknowns].tocsr()
    is_dir = np.zeros(nx1 * nxn, dtype=bool)
    is_dir[dirichlet_mask(grid).ravel()] = True
    boundary = full.multiply(is_dir[None, :]).tocsr()
    boundary.eliminate_zeros()

    weights = np.concatenate([np.ones(n_thin), np.full(len(unknowns) - n_thin, hn)])
    mass = np.concatenate([np.full(n_thin, alpha * hn * inv_dt),
                           np.full(len(unknowns) - n_thin, inv_dt)])
    source_coef = np.concatenate([np.full(n_thin, -alpha * hn),
                                  np.full(len(unknowns) - n_thin, -1.0)])
    return StepOperator(grid, dt, alpha, unknowns, n_thin, matrix, boundary,
                        weights, mass, source_coef)


@njit(cache=True)
def _psor(S, b, s, lp, lm, omega, tol, max_sweeps):
    n = b.shape[0]
    change = np.inf
    for sweep in range(max_sweeps):
        change = 0.0
        for i in range(n):
            acc = b[i]
            for j in range(n):
                acc -= S[i, j] * s[j]
            a = S[i, i]
            z = s[i] + omega * acc / a
            ap = a / omega
            if z > lp / ap:
                z -= lp / ap
            elif z < -lm / ap:
                z += lm / ap
            else:
                z = 0.0
            d = abs(z - s[i])
            if d > change:
                change = d
            s[i] = z
        if change <= tol:
            return sweep + 1, change
    return max_sweeps, change


@njit(cache=True)
def _ramp_solve(a, r, lp, lm, eps, smooth):
    # root of a*s + beta_eps(s) = r; strictly increasing left side
    if a * eps + lp <= r:
        return (r - lp) / a
    if -a * eps - lm >= r:
        return (r + lm) / a
    mid = 0.5 * (lp - lm)
    half = 0.5 * (lp + lm)
    if not smooth:
        return (r - mid) / (a + half / eps)
    lo, hi = -eps, eps
    for _ in range(200):
        s = 0.5 * (lo + hi)
        x = s / eps
        val = a * s + mid + half * 0.5 * (3.0 * x - x ** 3)
        if val > r:
            hi = s
        else:
            lo = s
        if hi - lo <= 1e-16 * max(1.0, abs(s)):
            break
    return 0.5 * (lo + hi)


@njit(cache=True)
def _nonlinear_gs(S, b, s, lp, lm, eps, smooth, damping, tol, max_sweeps):
    n = b.shape[0]
    change = np.inf
    for sweep in range(max_sweeps):
        change = 0.0
        for i in range(n):
            acc = b[i]
            for j in range(n):
                if j != i:
                    acc -= S[i, j] * s[j]
            z = _ramp_solve(S[i, i], acc, lp, lm, eps, smooth)
            z = s[i] + damping * (z - s[i])
            d = abs(z - s[i])
            if d > change:
                change = d
            s[i] = z
        if change <= tol:
            return sweep + 1, change
    return max_sweeps, change


def _direct_residual(S, b, s, p: PenaltyParams) -> float:
    """Max distance of ``b - S s`` from the subdifferential of ``B`` at ``s``."""
    xi = b - S @ s
    lo = np.where(s < 0, -p.lambda_minus, np.where(s > 0, p.lambda_plus, -p.lambda_minus))
    hi = np.where(s > 0, p.lambda_plus, np.where(s < 0, -p.lambda_minus, p.lambda_plus))
    return float(np.max(np.maximum(lo - xi, 0.0) + np.maximum(xi - hi, 0.0), initial=0.0))


def _active_set(S, b, s, p: PenaltyParams, max_iter=30):
    """Primal-dual active-set finish; returns the exact solution or None."""
    pos, neg = s > 0, s < 0
    for _ in range(max_iter):
        free = pos | neg
        x = np.zeros_like(s)
        if free.any():
            rhs = b[free] - np.where(pos[free], p.lambda_plus, -p.lambda_minus)
            x[free] = scipy.linalg.solve(S[np.ix_(free, free)], rhs, assume_a="pos")
        xi = b - S @ x
        new_pos = (pos & (x > 0)) | (~free & (xi > p.lambda_plus))
        new_neg = (neg & (x < 0)) | (~free & (xi < -p.lambda_minus))
        if np.array_equal(new_pos, pos) and np.array_equal(new_neg, neg):
            return x
        pos, neg = new_pos, new_neg
    return None


class Stepper:
    """Time stepper bound to a grid and problem data.

    Parameters
    ----------
    grid : HalfGrid
    data : ProblemData
    flux_order : int
        1 for the first-order folded thin row, 2 for the second-order variant.
    omega : float
        Relaxation factor of projected SOR (direct mode).
    tol : float
        Newton residual tolerance (penalized) or sweep-change tolerance (direct).
    dt : float, optional
        Overrides ``grid.dt``; ``inf`` steps straight to the steady state.
    """

    def __init__(self, grid: HalfGrid, data: ProblemData, flux_order: int = 1,
                 omega: float = 1.5, tol: float = 1e-10, dt: float | None = None,
                 max_newton: int = NEWTON_CAP, max_sweeps: int = SWEEP_CAP):
        if not 0 < omega < 2:
            raise ConfigError("omega must lie in (0, 2)")
        if not tol > 0:
            raise ConfigError("tolerance must be positive")
        self.grid = grid
        self.data = data
        self.op = assemble_step_operator(grid, dt, flux_order)
        self.omega = omega
        self.tol = tol
        self.max_newton = max_newton
        self.max_sweeps = max_sweeps

    # ---- reduced system -------------------------------------------------

    def _reduce(self, u_prev, t_new):
        g_slice = self.data.boundary(self.grid, t_new)
        f_slice = self.data.source(self.grid, t_new)
        c = self.op.weights * self.op.rhs(u_prev, g_slice, f_slice)
        sc = self.op.schur()
        m = self.op.n_thin
        c_I = c[m:]
        b = c[:m] - sc["H_TI"] @ sc["lu"].solve(c_I)
        return sc["S"], b, c_I, g_slice

    def _expand(self, s, c_I, g_slice):
        sc = self.op.schur()
        u_I = sc["lu"].solve(c_I - sc["H_IT"] @ s)
        out = g_slice.copy()
        mask = dirichlet_mask(self.grid)
        out[~mask] = 0.0
        flat = out.ravel()
        flat[self.op.unknowns] = np.concatenate([s, u_I])
        return flat.reshape(self.grid.shape)

    def _guess(self, guess, u_prev, k):
        m = self.op.n_thin
        prev = u_prev.ravel()[self.op.unknowns[:m]]
        if guess is None or (isinstance(guess, str) and guess == "previous"):
            return prev.copy()
        if isinstance(guess, str) and guess == "zero":
            return np.zeros(m)
        if callable(guess):
            return np.asarray(guess(k, m), dtype=float).copy()
        arr = np.asarray(guess, dtype=float)
        if arr.ndim == 0:
            return np.full(m, float(arr))
        if arr.shape == self.grid.shape:
            return arr.ravel()[self.op.unknowns[:m]].copy()
        return arr.reshape(m).copy()

    # ---- steps ------------------------------------------------------------

    def step_penalized(self, u_prev: np.ndarray, k: int, penalty: PenaltyParams | None = None,
                       guess=None) -> tuple[np.ndarray, StepReport]:
        """Advance to time level ``k`` with the thin condition ``du/dxn = beta_eps(u)``."""
        p = self.data.penalty if penalty is None else penalty
        t_new = self.grid.t_range[0] + k * self.op.dt if np.isfinite(self.op.dt) else self.grid.t_range[1]
        S, b, c_I, g_slice = self._reduce(u_prev, t_new)
        s = self._guess(guess, u_prev, k)

        def energy(x):
            return 0.5 * x @ (S @ x) - b @ x + np.sum(b_eps_value(x, p))

        method = "newton"
        F = S @ s + beta_eps(s, p) - b
        res = float(np.max(np.abs(F)))
        it = 0
        while res > self.tol and it < self.max_newton:
            it += 1
            J = S + np.diag(beta_eps_slope(s, p))
            d = scipy.linalg.solve(J, -F, assume_a="pos")
            # full step first; backtrack on the convex energy only if needed
            e0, slope, step = energy(s), float(F @ d), 1.0
            for _ in range(40):
                trial = s + step * d
                Ft = S @ trial + beta_eps(trial, p) - b
                if (np.max(np.abs(Ft)) <= 0.5 * res
                        or energy(trial) <= e0 + 1e-4 * step * slope):
                    break
                step *= 0.5
            s, F = trial, Ft
            res = float(np.max(np.abs(F)))
        if res > self.tol:
            method = "gauss-seidel"
            log.info("step %d: Newton stalled at %.2e, falling back to nonlinear GS", k, res)
            sweeps, _ = _nonlinear_gs(S, b, s, p.lambda_plus, p.lambda_minus, p.epsilon,
                                      p.smooth, 0.9, 0.1 * self.tol, self.max_sweeps)
            it += sweeps
            res = float(np.max(np.abs(S @ s + beta_eps(s, p) - b)))
            if res > self.tol:
                raise NonConvergence(it, res, k)
        u = self._expand(s, c_I, g_slice)
        return u, StepReport(k, "penalized", it, res, method, p.epsilon, energy(s))

    def step_direct(self, u_prev: np.ndarray, k: int, guess=None) -> tuple[np.ndarray, StepReport]:
        """Advance to level ``k`` by minimizing the per-step convex energy."""
        p = self.data.penalty
        t_new = self.grid.t_range[0] + k * self.op.dt if np.isfinite(self.op.dt) else self.grid.t_range[1]
        S, b, c_I, g_slice = self._reduce(u_prev, t_new)
        s = np.ascontiguousarray(self._guess(guess, u_prev, k))
        sweeps, change = _psor(S, b, s, p.lambda_plus, p.lambda_minus, self.omega,
                               self.tol, self.max_sweeps)
        if change > self.tol:
            raise NonConvergence(sweeps, change, k)
        method = "psor"
        exact = _active_set(S, b, s, p)
        if exact is not None and _direct_residual(S, b, exact, p) <= _direct_residual(S, b, s, p):
            s, method = exact, "psor+active-set"
        res = _direct_residual(S, b, s, p)
        energy = 0.5 * s @ (S @ s) - b @ s + float(np.sum(b_value(s, p)))
        u = self._expand(s, c_I, g_slice)
        return u, StepReport(k, "direct", sweeps, res, method, None, energy)


@dataclass
class RunResult:
    """Output of :func:`run`: the final field plus per-step and per-level reports."""

    field: SpaceTimeField
    reports: list[StepReport]
    schedule: list[float] = field(default_factory=list)
    increments: list[float] = field(default_factory=list)
    levels: list[SpaceTimeField] = field(default_factory=list)


def default_schedule(p: PenaltyParams, grid: HalfGrid) -> list[float]:
    """``eps_k = 2^-k eps_0`` down to ``hxn``."""
    eps, out = p.epsilon, []
    floor = grid.hxn * (1.0 - 1e-12)
    while eps >= floor:
        out.append(eps)
        eps *= 0.5
    return out or [p.epsilon]


def _evolve(stepper: Stepper, mode, penalty=None, guess=None, warm=None, label=""):
    grid = stepper.grid
    vals = np.empty((grid.nt + 1, grid.nx1, grid.nxn))
    vals[0] = stepper.data.initial(grid)
    reports = []
    for k in range(1, grid.nt + 1):
        g_k = guess if warm is None else warm.values[k]
        try:
            if mode == "direct":
                vals[k], rep = stepper.step_direct(vals[k - 1], k, g_k)
            else:
                vals[k], rep = stepper.step_penalized(vals[k - 1], k, penalty, g_k)
        except NonConvergence as exc:
            exc.time_index = k
            raise
        reports.append(rep)
    return SpaceTimeField.on_grid(grid, vals, label=label), reports


def run(data: ProblemData, grid: HalfGrid, mode: str = "direct", schedule=None,
        guess=None, keep_levels: bool = False, check: bool = True, **stepper_opts) -> RunResult:
    """Solve on the whole space-time grid.

    In penalized mode ``schedule`` is a decreasing list of eps values (default
    :func:`default_schedule`); each level is warm-started from the previous
    one and the sup-norm Cauchy increments between levels are reported.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    if check:
        data.check(grid)
    stepper = Stepper(grid, data, **stepper_opts)
    label = data.label or mode
    if mode == "direct":
        fld, reports = _evolve(stepper, mode, guess=guess, label=label)
        return RunResult(fld, reports)

    sched = default_schedule(data.penalty, grid) if schedule is None else list(schedule)
    if any(e <= 0 for e in sched) or any(b >= a for a, b in zip(sched, sched[1:])):
        raise ConfigError("eps schedule must be positive and strictly decreasing")
    prev, reports, incs, levels = None, [], [], []
    for eps in sched:
        fld, reps = _evolve(stepper, mode, data.penalty.with_epsilon(eps), guess=guess,
                            warm=prev, label=f"{label}_eps{eps:g}")
        if prev is not None:
            incs.append(float(np.max(np.abs(fld.values - prev.values))))
        reports.extend(reps)
        if keep_levels:
            levels.append(fld)
        prev = fld
    return RunResult(prev, reports, sched, incs, levels)
