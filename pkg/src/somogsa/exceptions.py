"""Exception types shared across the package."""


class SomogsaError(Exception):
    """Base class for all package errors."""


class DimensionError(SomogsaError, ValueError):
    """A point or vector does not match the problem dimension."""


class CapabilityError(SomogsaError, RuntimeError):
    """The requested capability (analytic gradient, d != 2 landscape, ...) is unavailable."""


class ValidationError(SomogsaError, ValueError):
    """A configuration or transform failed validation."""


class NumericError(SomogsaError, ArithmeticError):
    """An evaluator returned NaN or infinity."""

    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


class PreconditionError(SomogsaError, ValueError):
    """An operation was called with inputs violating its precondition."""


class UndefinedAngleError(SomogsaError, ValueError):
    """Angle requested between vectors where one has zero length."""
