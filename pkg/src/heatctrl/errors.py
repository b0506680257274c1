"""Exception types shared across the package."""


class HeatCtrlError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(HeatCtrlError):
    """Inconsistent or unsupported parameters (bad tags, violated preconditions)."""


class TruncationError(HeatCtrlError):
    """A requested tolerance could not be met with the available modes or grid.

    Carries the bound that *was* achieved so callers can decide whether to
    proceed anyway.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class NumericError(HeatCtrlError):
    """A numerical procedure failed to converge; carries the residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class IllConditionedError(HeatCtrlError):
    """A linear solve was rejected because of its condition number."""

    def __init__(self, message, cond=None):
        super().__init__(message)
        self.cond = cond


class DegenerateInputError(HeatCtrlError):
    """Input is identically zero or otherwise makes the requested quantity undefined."""


class InvariantViolation(HeatCtrlError):
    """A structural invariant of a domain object does not hold."""
