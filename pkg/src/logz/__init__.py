"""Normalizing constants of log-concave densities by Gaussian annealing and ULA."""
from ._backend import NAME as BACKEND
from .config import RunConfig
from .errors import (
    BoundConditionError,
    BudgetExceededError,
    ClosedFormGaussian,
    ConfigError,
    DivergenceError,
    LogzError,
    OptimizationError,
    OracleUnavailableError,
    ParseError,
    ValidationError,
)
from .potential import (
    PotentialSpec,
    center_at_mode,
    gaussian_potential,
    linear_regression_potential,
    logcosh_potential,
    logistic_regression_potential,
    pseudo_huber_potential,
)
from .schedule import Schedule, build_schedule, cost_bound

__version__ = "0.1.0"
