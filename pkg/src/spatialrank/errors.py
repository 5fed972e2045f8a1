"""Exception hierarchy shared by the library and the CLI."""


class SpatialRankError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(SpatialRankError, ValueError):
    pass


class DegenerateInputError(SpatialRankError, ValueError):
    """A sample has a column with zero spread (or too few rows)."""


class ConvergenceError(SpatialRankError, RuntimeError):
    """A fixed-point iteration hit its iteration cap.

    ``last`` holds the last iterate and ``residual`` the final residual so
    callers can decide whether the approximation is usable.
    """

    def __init__(self, message, last=None, residual=None, iterations=None):
        super().__init__(message)
        self.last = last
        self.residual = residual
        self.iterations = iterations


class EstimatorBreakdownError(SpatialRankError, ArithmeticError):
    """A trace estimate came out non-positive, so no variance is available."""


class UnsupportedRegimeError(SpatialRankError, ValueError):
    pass


class PlanValidationError(SpatialRankError, ValueError):
    pass


class ConfigError(SpatialRankError, ValueError):
    """Config schema violation; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


class ParseError(SpatialRankError, ValueError):
    def __init__(self, source, line, message):
        super().__init__(f"{source}:{line}: {message}")
        self.source = source
        self.line = line
