"""Exception hierarchy shared by the lab modules."""


class AdvcalError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(AdvcalError, ValueError):
    """Unknown loss kind, bad parameters, malformed config."""


class DomainError(AdvcalError, ValueError):
    """An argument lies outside the domain of an operation."""


class PreconditionError(AdvcalError, ValueError):
    pass


class NumericError(AdvcalError, ArithmeticError):
    pass


class ResourceError(AdvcalError, RuntimeError):
    """The requested computation exceeds a hard size limit."""


class InvariantViolation(AdvcalError, AssertionError):
    """Two routes that must agree did not."""

    def __init__(self, message, values=None):
        super().__init__(message)
        self.values = dict(values or {})


class DivergenceError(AdvcalError, RuntimeError):
    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory
