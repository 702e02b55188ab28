"""Exception hierarchy. CLI exit codes are keyed on these classes."""


class LromError(Exception):
    """Base class for all package errors."""


class ConfigError(LromError, ValueError):
    """Invalid configuration or arguments (exit code 2)."""


class DomainViolationError(ConfigError):
    """A parameter vector lies outside the parameter domain."""


class NumericError(LromError, ArithmeticError):
    """Numerical failure: singular systems, solver breakdown (exit code 3)."""

    def __init__(self, message, residual=None, condition=None):
        super().__init__(message)
        self.residual = residual
        self.condition = condition


class DegenerateGeometryError(NumericError):
    """The physical domain has no active degrees of freedom."""


class EmptyBasisError(NumericError):
    """A snapshot matrix has rank zero."""


class TrainingError(LromError):
    """Offline training cannot proceed with the given sizes (exit code 2)."""


class ArtifactError(LromError, OSError):
    """Model directory missing, corrupt or inconsistent (exit code 4)."""
