"""Exception hierarchy for the age-structured chemostat solver."""


class ChemostatError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(ChemostatError, ValueError):
    """An argument lies outside the domain of a model function."""


class GridError(ChemostatError, ValueError):
    """Grids are misaligned, or the time step is too coarse for a window."""


class ConstructionError(ChemostatError):
    """A requested object (e.g. a compatible initial state) cannot be built."""


class NumericError(ChemostatError, FloatingPointError):
    """A non-finite intermediate value appeared during a computation."""


class ConvergenceError(ChemostatError):
    """Picard iteration did not reach the requested tolerance.

    ``t_start`` is the absolute start time of the failing window (if known)
    and ``ratio`` the last measured contraction ratio.
    """

    def __init__(self, message, *, t_start=None, ratio=None):
        if t_start is not None:
            message = f"{message} (window starting at t={t_start:.17g})"
        super().__init__(message)
        self.t_start = t_start
        self.ratio = ratio


class ContractionViolation(ConvergenceError):
    """An iterate left the ball B_R; the window is too long for the grid."""


class SpliceError(ChemostatError):
    """Two trajectories do not join at a common state."""


class StabilityError(ChemostatError):
    """An explicit scheme was asked to run outside its stability region."""


class ConfigError(ChemostatError, ValueError):
    """A scenario configuration is malformed or inconsistent."""
