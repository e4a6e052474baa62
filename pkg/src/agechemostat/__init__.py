"""Age-structured chemostat: windowed fixed-point solver for a renewal
transport equation coupled to a substrate balance, with a validation layer."""
from .errors import (ChemostatError, ConfigError, ConstructionError, ContractionViolation,
                     ConvergenceError, DomainError, GridError, NumericError, SpliceError,
                     StabilityError)
from .flow import Numerics, Trajectory, advance, concat, flow_map
from .model import AgeProfile, ChemostatModel, Haldane, Monod, load_profile, validate_model
from .oracle import MomentOdeParams, moment_ode_oracle, upwind_pde_oracle
from .report import Report
from .signal import DilutionSignal
from .state import (ChemostatState, check_membership, make_compatible_exponential, metric,
                    read_snapshot, write_snapshot)
from .window import max_window, solve_window, window_constant

__version__ = "0.1.0"

__all__ = [
    "AgeProfile", "ChemostatError", "ChemostatModel", "ChemostatState", "ConfigError",
    "ConstructionError", "ContractionViolation", "ConvergenceError", "DilutionSignal",
    "DomainError", "GridError", "Haldane", "MomentOdeParams", "Monod", "NumericError",
    "Numerics", "Report", "SpliceError", "StabilityError", "Trajectory", "advance",
    "check_membership", "concat", "flow_map", "load_profile", "make_compatible_exponential",
    "max_window", "metric", "moment_ode_oracle", "read_snapshot", "solve_window",
    "upwind_pde_oracle", "validate_model", "window_constant", "write_snapshot",
]
