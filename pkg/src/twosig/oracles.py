"""Closed-form solutions used as ground truth.

Each oracle bundles the solution, its gradient, thin trace and thin flux
``du/dxn(x1, 0, t)``, and can hand its own boundary/initial data to the
stepper.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import AdmissibilityError
from .geometry import HalfGrid, SpaceTimeField
from .penalty import PenaltyParams
from .stepper import ProblemData


@dataclass(frozen=True)
class OracleSpec:
    name: str
    penalty: PenaltyParams
    u: Callable
    grad: Callable
    trace: Callable
    flux: Callable
    params: dict = field(default_factory=dict)

    def data(self) -> ProblemData:
        return ProblemData(self.penalty, self.u, label=self.name)

    def field(self, grid: HalfGrid) -> SpaceTimeField:
        fld = SpaceTimeField.from_function(self.u, grid.x1, grid.xn, grid.t, label=self.name)
        fld.grid = grid
        return fld


def linear_oracle(c: float, p: PenaltyParams) -> OracleSpec:
    """``u = c xn`` with zero trace; admissible iff ``-lambda_minus <= c <= lambda_plus``."""
    if not -p.lambda_minus <= c <= p.lambda_plus:
        raise AdmissibilityError(
            f"slope {c} outside [{-p.lambda_minus}, {p.lambda_plus}]"
        )
    return OracleSpec(
        "linear",
        p,
        u=lambda x1, xn, t: c * np.abs(xn) + 0.0 * x1,
        grad=lambda x1, xn, t: (0.0 * x1, c * np.sign(xn) + (xn == 0) * c),
        trace=lambda x1, t: 0.0 * np.asarray(x1, dtype=float),
        flux=lambda x1, t: c + 0.0 * np.asarray(x1, dtype=float),
        params={"c": c},
    )


def _z32(x1, xn):
    # branch with arg in [0, pi] on the closed upper half-plane
    z = np.asarray(x1, dtype=float) + 1j * np.abs(np.asarray(xn, dtype=float))
    return z ** 1.5, z ** 0.5


def signorini32_oracle(p: PenaltyParams, radius: float = 0.25,
                       grid: HalfGrid | None = None) -> OracleSpec:
    """``Re (x1 + i xn)^(3/2) + lambda_plus xn``, steady, one free boundary point at 0.

    Admissibility (nonnegative solution, flux band where the trace vanishes)
    is checked on ``grid`` if given, otherwise on a 257 x 129 sampling of
    ``[-radius, radius] x [0, radius]``.
    """
    lp = p.lambda_plus

    def u(x1, xn, t=0.0):
        return _z32(x1, xn)[0].real + lp * np.abs(xn)

    def grad(x1, xn, t=0.0):
        d = 1.5 * _z32(x1, xn)[1]
        return d.real, -d.imag + lp

    def trace(x1, t=0.0):
        x1 = np.asarray(x1, dtype=float)
        return np.where(x1 > 0, np.abs(x1) ** 1.5, 0.0)

    def flux(x1, t=0.0):
        x1 = np.asarray(x1, dtype=float)
        return np.where(x1 < 0, lp - 1.5 * np.sqrt(np.abs(x1)), lp)

    if grid is None:
        x1 = np.linspace(-radius, radius, 257)
        xn = np.linspace(0.0, radius, 129)
    else:
        x1, xn = grid.x1, grid.xn
    X1, XN = np.meshgrid(x1, xn, indexing="ij")
    fl = flux(x1)
    if np.min(u(X1, XN)) < -1e-14 or np.min(trace(x1)) < 0:
        raise AdmissibilityError("signorini32 oracle is negative on the domain; raise lambda_plus")
    if np.min(fl) < -p.lambda_minus - 1e-14 or np.max(fl) > lp + 1e-14:
        raise AdmissibilityError("signorini32 flux leaves the band; raise lambda_plus")
    return OracleSpec("signorini32", p, u, grad, trace, flux, {"radius": radius})


def caloric_neumann_oracle(p: PenaltyParams, s0: float = 3.0, x1_range=(-1.0, 1.0),
                           t_range=(-1.0, 0.0)) -> OracleSpec:
    """``lambda_plus xn + x1^2 + 2 t + s0``: caloric, trace > 0, flux = lambda_plus."""
    a, b = x1_range
    min_sq = 0.0 if a <= 0.0 <= b else min(a * a, b * b)
    min_trace = min_sq + 2.0 * t_range[0] + s0
    if min_trace <= 0:
        raise AdmissibilityError(f"trace not positive: minimum {min_trace}")
    lp = p.lambda_plus
    return OracleSpec(
        "caloric-neumann",
        p,
        u=lambda x1, xn, t: lp * np.abs(xn) + x1 ** 2 + 2.0 * t + s0,
        grad=lambda x1, xn, t: (2.0 * x1, lp + 0.0 * xn),
        trace=lambda x1, t: np.asarray(x1, dtype=float) ** 2 + 2.0 * np.asarray(t, dtype=float) + s0,
        flux=lambda x1, t: lp + 0.0 * np.asarray(x1, dtype=float),
        params={"s0": s0},
    )
