"""Exception hierarchy shared by every logz module."""
from __future__ import annotations


class LogzError(Exception):
    """Base class for all errors raised by logz."""


class ValidationError(LogzError, ValueError):
    """A model or potential failed a structural check."""


class ConfigError(LogzError, ValueError):
    """A run configuration is inconsistent or out of range."""


class ParseError(LogzError, ValueError):
    """A dataset file could not be parsed.

    ``row`` is 1-based and counts the header line as row 1.
    """

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class OptimizationError(LogzError, RuntimeError):
    """Mode finding did not reach the gradient tolerance."""

    def __init__(self, message: str, best_x, grad_norm: float):
        super().__init__(message)
        self.best_x = best_x
        self.grad_norm = grad_norm


class DivergenceError(LogzError, RuntimeError):
    """A Langevin chain produced a non-finite state."""

    def __init__(self, phase: int, step: int, message: str | None = None):
        msg = message or f"non-finite chain state in phase {phase} at step {step}"
        super().__init__(msg)
        self.phase = phase
        self.step = step


class BudgetExceededError(LogzError, RuntimeError):
    """The tuned schedule needs more Markov chain steps than allowed."""

    def __init__(self, cost: int, budget: int):
        super().__init__(
            f"schedule requires {cost:.3e} chain steps, budget is {budget:.3e}"
        )
        self.cost = cost
        self.budget = budget


class ClosedFormGaussian(LogzError):
    """Raised by the schedule builder when m == L: the target is Gaussian.

    Carries the exact ``log_z`` so callers can short-circuit.
    """

    def __init__(self, log_z: float):
        super().__init__("m == L: the target is an isotropic Gaussian, Z is closed-form")
        self.log_z = log_z


class OracleUnavailableError(LogzError):
    """No reference value can be computed for the requested model."""


class BoundConditionError(LogzError, ValueError):
    """Step size or variance violates the preconditions of the MSE bounds."""
