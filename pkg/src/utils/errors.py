"""
Exception hierarchy for the hierarchical tensor solver toolkit.
Every error raised on purpose by the package derives from HTSolveError.
"""
from typing import Any


class HTSolveError(Exception):
    """Base class for all toolkit errors."""


class InvalidOrderError(HTSolveError, ValueError):
    """Tensor order d is below 2."""


class CapacityError(HTSolveError):
    """A dense materialization would exceed the configured entry cap."""

    def __init__(self, requested: int, cap: int):
        super().__init__(f"dense size {requested} exceeds cap {cap}")
        self.requested = requested
        self.cap = cap


class TreeMismatchError(HTSolveError, ValueError):
    """Operands live on different dimension trees or mode sizes."""


class ShapeMismatchError(HTSolveError, ValueError):
    """Operator and tensor shapes are incompatible."""


class InsufficientDataError(HTSolveError, ValueError):
    """Not enough nonzero singular values to fit a decay model."""


class InvalidConfigError(HTSolveError, ValueError):
    """A configuration value is outside its valid range."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class ScheduleKindError(HTSolveError, ValueError):
    """The threshold schedule kind does not fit the requested iteration."""


class PreconditionError(HTSolveError, ValueError):
    """Structural precondition of an oracle is not met."""


class SingularSystemError(HTSolveError):
    """The materialized linear system could not be factorized."""


class SolverFailure(HTSolveError):
    """A solver stopped without meeting its residual criterion."""

    def __init__(self, message: str, trace: Any):
        super().__init__(message)
        self.trace = trace


class MaxIterError(SolverFailure):
    """Iteration cap reached before the stopping criterion held."""


class DeltaUnderflowError(SolverFailure):
    """Residual tolerance shrank to zero or below representable range."""
