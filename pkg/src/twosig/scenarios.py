"""Named problem setups.

Each builder takes the penalty parameters and a parameter dict and returns
the problem data plus, when one exists, the closed-form oracle.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import ConfigError
from .oracles import (
    OracleSpec,
    caloric_neumann_oracle,
    linear_oracle,
    signorini32_oracle,
)
from .penalty import PenaltyParams
from .stepper import ProblemData


def _zero(p, params, grid=None):
    return ProblemData(p, lambda x1, xn, t: 0.0 * (x1 + xn + t), label="zero"), None


def _linear(p, params, grid=None):
    o = linear_oracle(float(params.get("c", p.lambda_plus)), p)
    return o.data(), o


def _signorini32(p, params, grid=None):
    o = signorini32_oracle(p, radius=float(params.get("radius", 0.25)), grid=grid)
    return o.data(), o


def _caloric(p, params, grid=None):
    ranges = {} if grid is None else {"x1_range": grid.x1_range, "t_range": grid.t_range}
    o = caloric_neumann_oracle(p, s0=float(params.get("s0", 3.0)), **ranges)
    return o.data(), o


def _collapse(p, params, grid=None):
    d = float(params.get("delta", 0.0))
    return ProblemData(p, lambda x1, xn, t: d + 0.0 * (x1 + xn + t), label=f"collapse{d:g}"), None


def crossing_data(p: PenaltyParams, amplitude: float = 1.0, width: float | None = None,
                  label: str = "two-phase-crossing") -> ProblemData:
    """Lateral and initial data odd in ``x1``: ``A x1`` or ``A tanh(x1 / width)``.

    The initial trace changes sign at ``x1 = 0``, so both phases are present
    from the start and touch there.
    """
    a = float(amplitude)
    if width is None:
        def g(x1, xn, t):
            return a * x1 + 0.0 * (xn + t)
    else:
        w = float(width)
        if not w > 0:
            raise ConfigError("width must be positive")

        def g(x1, xn, t):
            return a * np.tanh(x1 / w) + 0.0 * (xn + t)
    return ProblemData(p, g, label=label)


def _crossing(p, params, grid=None):
    return crossing_data(p, params.get("amplitude", 1.0), params.get("width")), None


def _blowup(p, params, grid=None):
    return crossing_data(p, params.get("amplitude", 1.0), params.get("width"),
                         label="blowup-probe"), None


def tabulated_data(p: PenaltyParams, x1, t, values, xn=None, label="tabulated") -> ProblemData:
    """Boundary and initial data interpolated piecewise-linearly from samples.

    ``values`` has shape ``(len(t), len(x1))`` (independent of ``xn``) or
    ``(len(t), len(x1), len(xn))``.
    """
    t = np.asarray(t, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    vals = np.asarray(values, dtype=float)
    if xn is None:
        if vals.shape != (len(t), len(x1)):
            raise ConfigError(f"tabulated values must have shape {(len(t), len(x1))}")
        interp = RegularGridInterpolator((t, x1), vals, bounds_error=True)

        def g(a, b, s):
            a, b, s = np.broadcast_arrays(a, b, s)
            pts = np.stack([s.ravel(), a.ravel()], axis=1)
            return interp(pts).reshape(a.shape)
    else:
        xn = np.asarray(xn, dtype=float)
        if vals.shape != (len(t), len(x1), len(xn)):
            raise ConfigError("tabulated values shape does not match (t, x1, xn)")
        interp = RegularGridInterpolator((t, x1, xn), vals, bounds_error=True)

        def g(a, b, s):
            a, b, s = np.broadcast_arrays(a, b, s)
            pts = np.stack([s.ravel(), a.ravel(), b.ravel()], axis=1)
            return interp(pts).reshape(a.shape)
    return ProblemData(p, g, label=label)


def _tabulated(p, params, grid=None):
    try:
        return tabulated_data(p, params["x1"], params["t"], params["values"],
                              params.get("xn")), None
    except KeyError as exc:
        raise ConfigError(f"tabulated scenario needs parameter {exc}") from None


SCENARIOS: dict[str, Callable] = {
    "zero": _zero,
    "linear": _linear,
    "signorini32": _signorini32,
    "caloric-neumann": _caloric,
    "collapse": _collapse,
    "two-phase-crossing": _crossing,
    "blowup-probe": _blowup,
    "tabulated": _tabulated,
}


def build(name: str, p: PenaltyParams, params: dict | None = None, grid=None
          ) -> tuple[ProblemData, OracleSpec | None]:
    """Problem data (and oracle, if any) of a named scenario.

    ``grid`` is used to validate oracle admissibility where that matters.
    """
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    return SCENARIOS[name](p, dict(params or {}), grid)
