"""Exception types raised across the package."""


class TwoSigError(Exception):
    """Base class for all package errors."""


class ConfigError(TwoSigError, ValueError):
    """Invalid grid, data, or scenario configuration."""


class DomainExceeded(TwoSigError):
    """A sampling stencil or window leaves the data's domain."""


class DomainError(TwoSigError, ValueError):
    """Argument outside the mathematical domain of a function."""


class TailError(TwoSigError):
    """Truncated-quadrature tail bound larger than the requested accuracy."""


class AdmissibilityError(TwoSigError, ValueError):
    """Oracle parameters violate its sign or flux conditions."""


class ProbeError(TwoSigError):
    """A diagnostic probe cannot be placed."""


class NonConvergence(TwoSigError):
    """Iterative solver exhausted its iteration caps."""

    def __init__(self, iterations, residual, time_index=None):
        self.iterations = iterations
        self.residual = residual
        self.time_index = time_index
        where = "" if time_index is None else f" at time index {time_index}"
        super().__init__(
            f"no convergence{where}: {iterations} iterations, residual {residual:.3e}"
        )


class HypothesisViolation(UserWarning):
    """Input fields do not satisfy the assumptions of a functional."""
