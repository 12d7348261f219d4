"""Exception hierarchy. CLI exit codes map onto these classes."""


class TripEvalError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 2


class DataError(TripEvalError, ValueError):
    """Malformed input data, schema mismatch or violated preconditions."""

    exit_code = 2


class NumericError(TripEvalError, ArithmeticError):
    """A numerical routine failed (non-convergence, undefined statistic)."""

    exit_code = 3


class SinkhornConvergenceError(NumericError):
    def __init__(self, message: str, marginal_violation: float, iterations: int):
        super().__init__(message)
        self.marginal_violation = marginal_violation
        self.iterations = iterations
