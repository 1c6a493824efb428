"""Optimal stopping of skew Brownian motion.

Closed-form analytics of the process (:mod:`skewstop.sbm_core`), payoffs, the
operators used to locate stopping boundaries, regime solvers with closed-form
value functions, and a Monte Carlo engine to check them.
"""

__version__ = "0.1.0"

from .errors import AssumptionViolation, BracketError, DomainError, SkewStopError, UndefinedPointError
from .excessive_ops import OperatorContext, maximizer_set
from .payoff import FunctionPayoff, Payoff, ShiftedCall, shifted_call, validate_payoff
from .sbm_core import DensityPoint, SkewParams
from .stopping_solver import (
    Regime,
    SingleBoundary,
    Tangency,
    ThreeBoundary,
    ValueFunction,
    classify,
    continuation_region,
    critical_beta,
    critical_rate,
    solve,
    stopping_set,
    value_function,
)

__all__ = [
    "__version__",
    "AssumptionViolation",
    "BracketError",
    "DomainError",
    "SkewStopError",
    "UndefinedPointError",
    "OperatorContext",
    "maximizer_set",
    "FunctionPayoff",
    "Payoff",
    "ShiftedCall",
    "shifted_call",
    "validate_payoff",
    "DensityPoint",
    "SkewParams",
    "Regime",
    "SingleBoundary",
    "Tangency",
    "ThreeBoundary",
    "ValueFunction",
    "classify",
    "continuation_region",
    "critical_beta",
    "critical_rate",
    "solve",
    "stopping_set",
    "value_function",
]
