"""Exception types raised across the package."""


class NoiseEvalError(Exception):
    """Base class for all package errors."""


class ConfigError(NoiseEvalError, ValueError):
    """Invalid configuration value. ``field`` names the offending key when known."""

    def __init__(self, message, field=None):
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field


class ShapeError(NoiseEvalError, ValueError):
    pass


class NumericError(NoiseEvalError, ArithmeticError):
    """Non-finite values where finite ones are required."""


class SchemaError(NoiseEvalError, ValueError):
    pass


class IngestionError(NoiseEvalError, ValueError):
    """A data cell could not be parsed; message carries row and column."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class SplitError(NoiseEvalError, ValueError):
    pass


class UndefinedMetricError(NoiseEvalError, ValueError):
    pass
