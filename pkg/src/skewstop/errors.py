"""Exception hierarchy shared by the solver, simulator and CLI."""


class SkewStopError(Exception):
    """Base class for all package errors."""


class DomainError(SkewStopError, ValueError):
    """A parameter or argument lies outside the domain where the quantity is defined."""


class UndefinedPointError(DomainError):
    """Evaluation requested at a point where the quantity has no single value (the skew point)."""


class AssumptionViolation(SkewStopError):
    """A sufficient condition required by a solver failed a numerical check."""


class BracketError(SkewStopError):
    """A bracketed root or maximizer search found no sign change in its bracket."""
