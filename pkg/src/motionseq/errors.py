"""Exception types raised across the package."""


class MotionseqError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(MotionseqError, ValueError):
    """An argument violates a documented precondition."""


class FormatError(MotionseqError, ValueError):
    """A data file does not match the expected text format."""


class ConfigError(MotionseqError, ValueError):
    """A configuration is inconsistent with itself, the data, or a model."""


class NumericError(MotionseqError, ArithmeticError):
    """A computation produced non-finite values."""


class EvaluationError(MotionseqError, RuntimeError):
    """A predictor failed while being evaluated on a clip."""
