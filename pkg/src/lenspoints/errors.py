"""Exception hierarchy shared by every module."""


class LensPointsError(Exception):
    """Base class for all errors raised by the package."""


class DomainError(LensPointsError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigError(LensPointsError, ValueError):
    """Invalid setting, isotopy description or run configuration."""


class NumericError(LensPointsError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ContractViolation(LensPointsError):
    """A postcondition or precondition that callers must guarantee was broken."""


class UnsupportedError(LensPointsError):
    """The request is well formed but deliberately not handled."""
