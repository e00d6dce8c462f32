"""Exception hierarchy. Each class carries the CLI exit code it maps to."""

from __future__ import annotations


class NligniteError(Exception):
    exit_code = 1

    def __init__(self, message: str, **payload):
        super().__init__(message)
        self.payload = payload


class ValidationError(NligniteError):
    """Bad kernel, bad nonlinearity, bad config."""

    exit_code = 2


class ConfigurationError(ValidationError):
    pass


class DivergenceError(ValidationError):
    """An integral requested outside the window where it converges."""


class DomainError(ValidationError):
    pass


class GridError(ValidationError):
    pass


class DiagnosticError(NligniteError):
    exit_code = 3


class InsufficientDataError(DiagnosticError):
    pass


class IntegrationError(NligniteError):
    exit_code = 3


class ConvergenceError(NligniteError):
    exit_code = 3


class WindowError(ConvergenceError):
    pass


class NonConvergenceError(ConvergenceError):
    def __init__(self, message: str, best=None, **payload):
        super().__init__(message, **payload)
        self.best = best


class RootNotFoundError(ConvergenceError):
    pass


class InvariantViolation(NligniteError):
    exit_code = 4


class ZeroSpeedError(NligniteError):
    """Speed below the zero-speed guard; standing fronts are not handled."""

    exit_code = 4


class TailConditionError(InvariantViolation):
    """The measured fronts do not satisfy k*phi <= phi' (xi <= 0) and
    phi_hat' <= -k_hat*phi_hat (xi_hat >= 0) with positive k, k_hat; this is
    what happens when phi'/phi tends to 0 in the far tail."""


class ConstructionError(InvariantViolation):
    """A computed solution left the sub/supersolution sandwich."""
