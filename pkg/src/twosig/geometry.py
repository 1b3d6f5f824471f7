"""Space-time grids on the half-rectangle, parabolic metric, cylinders,
even reflection and parabolic rescaling of grid functions.

The solver domain is ``[a1, b1] x [0, H]`` in space (thin line ``xn = 0``)
times ``(t0, t1]``.  Fields store their own coordinate vectors so that
translated, reflected and rescaled copies stay self-describing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, DomainExceeded

# relative tolerance used to snap sample coordinates onto grid nodes
_SNAP = 1e-9

CYLINDER_KINDS = ("past", "full", "thin", "full_thin")


@dataclass(frozen=True)
class HalfGrid:
    """Uniform space-time mesh of ``[a1, b1] x [0, height] x (t0, t1]``.

    ``nx1`` and ``nxn`` count nodes (endpoints included), ``nt`` counts
    time steps, so there are ``nt + 1`` time levels with level 0 at ``t0``.
    """

    nx1: int
    nxn: int
    nt: int
    x1_range: tuple[float, float] = (-1.0, 1.0)
    height: float = 1.0
    t_range: tuple[float, float] = (-1.0, 0.0)

    def __post_init__(self):
        a, b = self.x1_range
        t0, t1 = self.t_range
        if self.nx1 < 3 or self.nxn < 2 or self.nt < 1:
            raise ConfigError(
                f"degenerate grid: nx1={self.nx1}, nxn={self.nxn}, nt={self.nt}"
            )
        if not (b > a and self.height > 0 and t1 > t0):
            raise ConfigError("grid ranges must be nonempty intervals")
        object.__setattr__(self, "x1_range", (float(a), float(b)))
        object.__setattr__(self, "t_range", (float(t0), float(t1)))
        object.__setattr__(self, "height", float(self.height))

    @classmethod
    def from_spacing(cls, h, nt, x1_range=(-1.0, 1.0), height=1.0,
                     t_range=(-1.0, 0.0)):
        """Grid with equal spatial steps ``h`` in both directions."""
        a, b = x1_range
        nx1 = round((b - a) / h) + 1
        nxn = round(height / h) + 1
        if not (np.isclose((nx1 - 1) * h, b - a) and np.isclose((nxn - 1) * h, height)):
            raise ConfigError(f"spacing {h} does not divide the domain")
        return cls(nx1, nxn, nt, x1_range, height, t_range)

    @property
    def hx1(self) -> float:
        return (self.x1_range[1] - self.x1_range[0]) / (self.nx1 - 1)

    @property
    def hxn(self) -> float:
        return self.height / (self.nxn - 1)

    @property
    def dt(self) -> float:
        return (self.t_range[1] - self.t_range[0]) / self.nt

    @property
    def x1(self) -> np.ndarray:
        return self.x1_range[0] + np.arange(self.nx1) * self.hx1

    @property
    def xn(self) -> np.ndarray:
        return np.arange(self.nxn) * self.hxn

    @property
    def t(self) -> np.ndarray:
        return self.t_range[0] + np.arange(self.nt + 1) * self.dt

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx1, self.nxn)

    def refine(self, factor: int = 2, time_factor: int | None = None) -> "HalfGrid":
        """Grid with steps divided by ``factor`` (time by ``time_factor``)."""
        tf = factor if time_factor is None else time_factor
        return HalfGrid(
            (self.nx1 - 1) * factor + 1,
            (self.nxn - 1) * factor + 1,
            self.nt * tf,
            self.x1_range,
            self.height,
            self.t_range,
        )

    def with_time(self, nt: int, t_range=None) -> "HalfGrid":
        return HalfGrid(self.nx1, self.nxn, nt, self.x1_range, self.height,
                        self.t_range if t_range is None else t_range)

    def index_of(self, x1: float, xn: float = 0.0) -> tuple[int, int]:
        """Nearest node indices of a spatial point."""
        i = int(round((x1 - self.x1_range[0]) / self.hx1))
        j = int(round(xn / self.hxn))
        return min(max(i, 0), self.nx1 - 1), min(max(j, 0), self.nxn - 1)


@dataclass(frozen=True)
class ParabolicCylinder:
    """Parabolic cylinder about ``center = (x1, xn, t)``.

    ``kind`` is ``"past"`` (ball x (t-r^2, t]), ``"full"``
    (ball x (t-r^2, t+r^2)), or the thin variants ``"thin"`` /
    ``"full_thin"`` restricted to ``xn = 0``.
    """

    center: tuple[float, float, float]
    radius: float
    kind: str = "past"

    def __post_init__(self):
        if self.radius <= 0:
            raise ConfigError("cylinder radius must be positive")
        if self.kind not in CYLINDER_KINDS:
            raise ConfigError(f"unknown cylinder kind {self.kind!r}")

    @property
    def is_full(self) -> bool:
        return self.kind in ("full", "full_thin")

    @property
    def time_interval(self) -> tuple[float, float]:
        t0, r2 = self.center[2], self.radius ** 2
        return (t0 - r2, t0 + r2 if self.is_full else t0)

    def contains(self, x1, xn, t):
        x1, xn, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x1, xn, t)))
        c1, cn, ct = self.center
        r = self.radius
        lo, hi = self.time_interval
        inside = np.hypot(x1 - c1, xn - cn) < r
        inside &= t > lo
        inside &= (t < hi) if self.is_full else (t <= hi)
        if self.kind in ("thin", "full_thin"):
            inside &= np.abs(xn) <= 1e-12
        return inside


def _as_points(P) -> np.ndarray:
    """Normalize points to an ``(m, d + 1)`` array with time last.

    Accepts an array of rows or a sequence of ``(x, t)`` pairs where ``x``
    is a spatial coordinate tuple.
    """
    if isinstance(P, np.ndarray):
        arr = np.asarray(P, dtype=float)
        return arr.reshape(0, 2) if arr.size == 0 else np.atleast_2d(arr)
    rows = []
    for p in P:
        x, t = p
        rows.append([*np.atleast_1d(np.asarray(x, dtype=float)), float(t)])
    if not rows:
        return np.zeros((0, 2))
    return np.asarray(rows, dtype=float)


def parabolic_distance(p, q) -> float:
    """``max(|x - y|, |t - s|^(1/2))`` for points ``p = (x, t)``, ``q = (y, s)``."""
    a = _as_points([p])[0]
    b = _as_points([q])[0]
    return float(max(np.linalg.norm(a[:-1] - b[:-1]), np.sqrt(abs(a[-1] - b[-1]))))


def set_distance(A, B) -> float:
    """Infimum of pairwise parabolic distances; ``inf`` if a set is empty."""
    a = _as_points(A)
    b = _as_points(B)
    if len(a) == 0 or len(b) == 0:
        return np.inf
    best = np.inf
    # chunk over A to bound memory on long free-boundary tracks
    for start in range(0, len(a), 2048):
        blk = a[start:start + 2048]
        dx = np.linalg.norm(blk[:, None, :-1] - b[None, :, :-1], axis=-1)
        dt = np.sqrt(np.abs(blk[:, None, -1] - b[None, :, -1]))
        best = min(best, float(np.maximum(dx, dt).min()))
    return best


def _locate(nodes: np.ndarray, x: np.ndarray):
    """Bracketing index and linear weight of ``x`` in increasing ``nodes``."""
    x = np.asarray(x, dtype=float)
    n = len(nodes)
    scale = np.min(np.diff(nodes)) if n > 1 else max(1.0, abs(nodes[0]))
    tol = _SNAP * scale
    if np.any(x < nodes[0] - tol) or np.any(x > nodes[-1] + tol):
        raise DomainExceeded(
            f"sample range [{x.min():.6g}, {x.max():.6g}] outside "
            f"[{nodes[0]:.6g}, {nodes[-1]:.6g}]"
        )
    if n == 1:
        z = np.zeros(x.shape, dtype=int)
        return z, z, np.zeros(x.shape)
    xc = np.clip(x, nodes[0], nodes[-1])
    i = np.clip(np.searchsorted(nodes, xc, side="right") - 1, 0, n - 2)
    w = (xc - nodes[i]) / (nodes[i + 1] - nodes[i])
    w = np.where(np.abs(w) < _SNAP, 0.0, w)
    w = np.where(np.abs(w - 1.0) < _SNAP, 1.0, w)
    # exact node hits use a single index so no blending happens at all
    at_right = w == 1.0
    i = np.where(at_right, i + 1, i)
    w = np.where(at_right, 0.0, w)
    return i, np.minimum(i + 1, n - 1), w


def _interp_axis(values: np.ndarray, axis: int, nodes, x) -> np.ndarray:
    i0, i1, w = _locate(np.asarray(nodes, dtype=float), x)
    a = np.take(values, i0, axis=axis)
    b = np.take(values, i1, axis=axis)
    shape = [1] * values.ndim
    shape[axis] = len(w)
    w = w.reshape(shape)
    out = a * (1.0 - w) + b * w
    # keep node values bit-exact where no blending is needed
    return np.where(w == 0.0, a, out)


@dataclass
class SpaceTimeField:
    """Real grid function with ``values[k, i, j] = u(x1[i], xn[j], t[k])``."""

    x1: np.ndarray
    xn: np.ndarray
    t: np.ndarray
    values: np.ndarray
    grid: HalfGrid | None = None
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x1 = np.asarray(self.x1, dtype=float)
        self.xn = np.asarray(self.xn, dtype=float)
        self.t = np.asarray(self.t, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        expected = (len(self.t), len(self.x1), len(self.xn))
        if self.values.shape != expected:
            raise ConfigError(f"values shape {self.values.shape} != {expected}")
        if not np.all(np.isfinite(self.values)):
            raise ConfigError("field contains non-finite values")

    @classmethod
    def on_grid(cls, grid: HalfGrid, values=None, label="") -> "SpaceTimeField":
        if values is None:
            values = np.zeros((grid.nt + 1, grid.nx1, grid.nxn))
        return cls(grid.x1, grid.xn, grid.t, values, grid=grid, label=label)

    @classmethod
    def from_function(cls, fn: Callable, x1, xn, t, label="") -> "SpaceTimeField":
        """Sample ``fn(x1, xn, t)`` (vectorized) on a tensor grid."""
        x1, xn, t = (np.asarray(v, dtype=float) for v in (x1, xn, t))
        T, X1, XN = np.meshgrid(t, x1, xn, indexing="ij")
        vals = np.broadcast_to(np.asarray(fn(X1, XN, T), dtype=float), T.shape)
        return cls(x1, xn, t, np.array(vals), label=label)

    @property
    def is_reflected(self) -> bool:
        return bool(self.xn[0] < 0.0)

    @property
    def thin_index(self) -> int:
        j = int(np.argmin(np.abs(self.xn)))
        if abs(self.xn[j]) > _SNAP * max(1.0, float(np.ptp(self.xn))):
            raise DomainExceeded("field does not contain the thin line xn = 0")
        return j

    @property
    def hx1(self) -> float:
        return float(self.x1[1] - self.x1[0])

    @property
    def hxn(self) -> float:
        return float(self.xn[1] - self.xn[0])

    def trace(self) -> np.ndarray:
        """Values on the thin line, shape ``(len(t), len(x1))``."""
        return self.values[:, :, self.thin_index]

    def sample(self, x1, xn, t) -> np.ndarray:
        """Trilinear samples on the tensor product of the given coordinates."""
        v = _interp_axis(self.values, 0, self.t, np.atleast_1d(t))
        v = _interp_axis(v, 1, self.x1, np.atleast_1d(x1))
        return _interp_axis(v, 2, self.xn, np.atleast_1d(xn))

    def translated(self, x1_0: float = 0.0, t_0: float = 0.0) -> "SpaceTimeField":
        """Same values with coordinates relative to ``(x1_0, 0, t_0)``."""
        return SpaceTimeField(self.x1 - x1_0, self.xn.copy(), self.t - t_0,
                              self.values, grid=None, label=self.label,
                              meta=dict(self.meta))

    def restrict(self, x1_lim=None, xn_lim=None, t_lim=None) -> "SpaceTimeField":
        """Sub-field on closed coordinate boxes (node subsets, no copies of grid)."""
        def sel(c, lim):
            if lim is None:
                return slice(None)
            tol = _SNAP * max(1.0, float(np.ptp(c)))
            idx = np.nonzero((c >= lim[0] - tol) & (c <= lim[1] + tol))[0]
            return slice(idx[0], idx[-1] + 1)
        s1, sn, st = sel(self.x1, x1_lim), sel(self.xn, xn_lim), sel(self.t, t_lim)
        return SpaceTimeField(self.x1[s1], self.xn[sn], self.t[st],
                              self.values[st, s1, sn], label=self.label,
                              meta=dict(self.meta))

    def positive_part(self) -> "SpaceTimeField":
        return self._with_values(np.maximum(self.values, 0.0), "+")

    def negative_part(self) -> "SpaceTimeField":
        return self._with_values(np.maximum(-self.values, 0.0), "-")

    def scaled(self, a: float) -> "SpaceTimeField":
        return self._with_values(a * self.values, f"*{a:g}")

    def _with_values(self, values, suffix) -> "SpaceTimeField":
        return SpaceTimeField(self.x1, self.xn, self.t, values, grid=self.grid,
                              label=self.label + suffix, meta=dict(self.meta))


def reflect_even(u: SpaceTimeField) -> SpaceTimeField:
    """Even extension across ``xn = 0``; the thin line appears once."""
    if u.is_reflected or u.thin_index != 0:
        raise ConfigError("reflect_even expects a half-grid field starting at xn = 0")
    xn = np.concatenate([-u.xn[:0:-1], u.xn])
    values = np.concatenate([u.values[:, :, :0:-1], u.values], axis=2)
    return SpaceTimeField(u.x1, xn, u.t, values, label=u.label + "|even",
                          meta=dict(u.meta))


def rescale(u: SpaceTimeField, r: float, x1=None, xn=None, t=None) -> SpaceTimeField:
    """Parabolic rescaling ``u_r(x, t) = u(r x, r^2 t) / r`` about the origin.

    Without target coordinates the natural grid ``x / r, t / r^2`` is used,
    which samples source nodes only (no interpolation error).  Explicit
    targets are sampled trilinearly and must map into the source domain.
    """
    if not r > 0:
        raise ConfigError("rescaling factor must be positive")
    x1 = u.x1 / r if x1 is None else np.asarray(x1, dtype=float)
    xn = u.xn / r if xn is None else np.asarray(xn, dtype=float)
    t = u.t / r ** 2 if t is None else np.asarray(t, dtype=float)
    vals = u.sample(r * x1, r * xn, r * r * t) / r
    return SpaceTimeField(x1, xn, t, vals, label=f"{u.label}_r{r:g}",
                          meta=dict(u.meta))


def cylinder_node_mask(u: SpaceTimeField, cyl: ParabolicCylinder) -> np.ndarray:
    """Boolean mask over ``u.values`` of the nodes inside ``cyl``."""
    T, X1, XN = np.meshgrid(u.t, u.x1, u.xn, indexing="ij")
    return cyl.contains(X1, XN, T)


def points_in(points: np.ndarray, cyl: ParabolicCylinder) -> np.ndarray:
    """Rows of an ``(m, 3)`` point array ``(x1, xn, t)`` inside ``cyl``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    return pts[cyl.contains(pts[:, 0], pts[:, 1], pts[:, 2])]
