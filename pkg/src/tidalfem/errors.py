"""Exception hierarchy shared by the library and the command line."""


class TidalFemError(Exception):
    """Base class for all errors raised by tidalfem."""

    exit_code = 1


class ConfigError(TidalFemError, ValueError):
    exit_code = 2


class ValidationError(TidalFemError, ValueError):
    """A coefficient or input violates a documented bound."""

    exit_code = 2


class GeometryError(TidalFemError):
    exit_code = 2


class ConvergenceError(TidalFemError):
    """An iterative solver failed to reach its tolerance.

    The final relative residual is kept in ``residual`` so callers can
    report how far off the solve was.
    """

    exit_code = 3

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class ResourceError(TidalFemError):
    exit_code = 4
