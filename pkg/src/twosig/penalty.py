"""The two-sided boundary potential ``B``, its penalized derivative
``beta_eps`` and the exact proximal map of ``B``.

All functions are vectorized over ``s``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class PenaltyParams:
    """Slopes ``lambda_plus``, ``lambda_minus`` of ``B`` and penalization width.

    ``smooth=True`` selects the C^1 cubic ramp instead of the piecewise-linear
    one.
    """

    lambda_plus: float = 1.0
    lambda_minus: float = 1.0
    epsilon: float = 0.25
    smooth: bool = False

    def __post_init__(self):
        if not (self.lambda_plus > 0 and self.lambda_minus > 0):
            raise ConfigError("lambda_plus and lambda_minus must be positive")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")

    @property
    def Lambda(self) -> float:
        return max(self.lambda_plus, self.lambda_minus)

    @property
    def ramp_slope(self) -> float:
        """Lipschitz constant of the linear ramp, (l+ + l-) / (2 eps)."""
        return (self.lambda_plus + self.lambda_minus) / (2.0 * self.epsilon)

    def with_epsilon(self, epsilon: float) -> "PenaltyParams":
        return PenaltyParams(self.lambda_plus, self.lambda_minus, epsilon, self.smooth)


def b_value(s, p: PenaltyParams):
    """``B(s) = lambda_plus s^+ + lambda_minus s^-``."""
    s = np.asarray(s, dtype=float)
    return p.lambda_plus * np.maximum(s, 0.0) + p.lambda_minus * np.maximum(-s, 0.0)


def beta_eps(s, p: PenaltyParams):
    """Monotone ramp from ``-lambda_minus`` (s <= -eps) to ``lambda_plus`` (s >= eps)."""
    s = np.asarray(s, dtype=float)
    lp, lm, eps = p.lambda_plus, p.lambda_minus, p.epsilon
    mid = 0.5 * (lp - lm)
    half = 0.5 * (lp + lm)
    x = np.clip(s / eps, -1.0, 1.0)
    if p.smooth:
        return mid + half * 0.5 * (3.0 * x - x ** 3)
    return mid + half * x


def beta_eps_slope(s, p: PenaltyParams):
    """Derivative of :func:`beta_eps`; at the kinks ``|s| = eps`` the interior
    value is returned (the generalized derivative used by Newton)."""
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) <= p.epsilon
    if p.smooth:
        x = np.clip(s / p.epsilon, -1.0, 1.0)
        return np.where(inside, p.ramp_slope * 1.5 * (1.0 - x * x), 0.0)
    return np.where(inside, p.ramp_slope, 0.0)


def b_eps_value(s, p: PenaltyParams):
    """Antiderivative of :func:`beta_eps` vanishing at 0.

    Outside ``(-eps, eps)`` it differs from ``B`` by a constant of order eps
    (convexity forbids matching both ``B`` there and ``B_eps(0) = 0``).
    """
    s = np.asarray(s, dtype=float)
    lp, lm, eps = p.lambda_plus, p.lambda_minus, p.epsilon
    mid, half = 0.5 * (lp - lm), 0.5 * (lp + lm)
    x = np.clip(s / eps, -1.0, 1.0)
    if p.smooth:
        inner = mid * eps * x + half * eps * (0.75 * x ** 2 - 0.125 * x ** 4)
    else:
        inner = mid * eps * x + half * eps * 0.5 * x ** 2
    return inner + lp * np.maximum(s - eps, 0.0) + lm * np.maximum(-s - eps, 0.0)


def prox_b(q, a, w, p: PenaltyParams):
    """Minimizer of ``(a/2)(s - q)^2 + w B(s)`` over ``s`` (a > 0, w >= 0)."""
    q = np.asarray(q, dtype=float)
    up = w * p.lambda_plus / a
    dn = w * p.lambda_minus / a
    return np.where(q > up, q - up, np.where(q < -dn, q + dn, 0.0))
