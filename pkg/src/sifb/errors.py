"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A solver, schedule, or problem was wired together inconsistently.

    Raised at build time, never mid-iteration.
    """


class DimensionMismatch(ValueError):
    """Block vectors or operators with incompatible shapes were combined."""


class InfeasibleProblemError(ConfigurationError):
    """A structural feasibility condition on the problem constants fails."""


class NormEstimationError(RuntimeError):
    """Power iteration failed to converge; carries the last two Rayleigh quotients."""

    def __init__(self, message, last, prev):
        super().__init__(message)
        self.last = last
        self.prev = prev


class OracleError(RuntimeError):
    """An independent reference solve did not reach its requested tolerance."""
