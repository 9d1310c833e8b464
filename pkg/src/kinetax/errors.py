"""Exception types shared across the package."""


class KinetaxError(Exception):
    pass


class ModelError(KinetaxError, ValueError):
    """Invalid model parameters or coefficient construction failure."""


class DistributionError(KinetaxError, ValueError):
    """A state vector that is not on the population simplex."""


class InfeasibleIncomeError(DistributionError):
    """Target mean income outside [r_1, r_n]."""


class BlowUpError(KinetaxError, ArithmeticError):
    """A class population left [-tol, 1 + tol] during integration."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class DegenerateIncomeError(KinetaxError, ValueError):
    """Mean income is zero, so income shares are undefined."""


class InsufficientPointsError(KinetaxError, ValueError):
    pass


class SpanError(KinetaxError, ValueError):
    """Trajectory shorter than the requested delay."""


class NotReachedError(KinetaxError):
    """Convergence threshold never attained within the horizon."""

    def __init__(self, message, minimum=None):
        super().__init__(message)
        self.minimum = minimum


class BracketError(KinetaxError, ValueError):
    """Bisection endpoints do not straddle the transition."""


class ConfigError(KinetaxError, ValueError):
    """Malformed run or sweep configuration file."""
