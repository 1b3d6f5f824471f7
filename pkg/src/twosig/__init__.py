"""Two-phase parabolic Signorini problem: penalized and direct solvers,
free-boundary extraction, the monotonicity functional and property probes.
"""

from .diagnostics import (
    collapse_experiment,
    comparison_test,
    complementarity_residual,
    energy_monitors,
    growth_probe,
    holder_seminorms,
    time_oscillation_check,
)
from .errors import (
    AdmissibilityError,
    ConfigError,
    DomainError,
    DomainExceeded,
    HypothesisViolation,
    NonConvergence,
    ProbeError,
    TailError,
    TwoSigError,
)
from .freeboundary import FreeBoundaryTrack, extract, separation
from .geometry import (
    HalfGrid,
    ParabolicCylinder,
    SpaceTimeField,
    parabolic_distance,
    reflect_even,
    rescale,
    set_distance,
)
from .monotonicity import (
    MonotonicityReport,
    blowup_drive,
    heat_kernel,
    i_functional,
    phi,
    phi_rescaling_check,
)
from .oracles import caloric_neumann_oracle, linear_oracle, signorini32_oracle
from .penalty import PenaltyParams, b_eps_value, b_value, beta_eps, prox_b
from .stepper import ProblemData, RunResult, Stepper, run

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError", "ConfigError", "DomainError", "DomainExceeded",
    "FreeBoundaryTrack", "HalfGrid", "HypothesisViolation", "MonotonicityReport",
    "NonConvergence", "ParabolicCylinder", "PenaltyParams", "ProbeError", "ProblemData",
    "RunResult", "SpaceTimeField", "Stepper", "TailError", "TwoSigError",
    "b_eps_value", "b_value", "beta_eps", "blowup_drive", "caloric_neumann_oracle",
    "collapse_experiment", "comparison_test", "complementarity_residual",
    "energy_monitors", "extract", "growth_probe", "heat_kernel", "holder_seminorms",
    "i_functional", "linear_oracle", "parabolic_distance", "phi", "phi_rescaling_check",
    "prox_b", "reflect_even", "rescale", "run", "separation", "set_distance",
    "signorini32_oracle", "time_oscillation_check",
]
