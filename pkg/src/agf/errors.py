"""Exception hierarchy. CLI exit codes key off these classes."""


class AgfError(Exception):
    """Base class for all package errors."""


class ConfigError(AgfError, ValueError):
    """Invalid configuration value (bandwidth, patch size, attenuation...)."""


class InputError(AgfError, ValueError):
    """Malformed or mismatched input data: files, signal lengths, layouts."""


class MalformedGraphError(AgfError, ValueError):
    """Graph does not have the expected lattice structure."""


class PreconditionError(AgfError, ValueError):
    """An operation was called on data violating its precondition."""


class DesignError(AgfError, ValueError):
    """Filterbank design request cannot be satisfied."""


class IntervalError(AgfError, ValueError):
    """Chebyshev interval does not cover the observed spectrum."""


class NumericError(AgfError, ArithmeticError):
    """A numerical routine failed (eigensolver breakdown, zero degree)."""


class ConvergenceError(NumericError):
    """Iterative solver hit its iteration cap.

    Attributes
    ----------
    residual : float
        Relative residual at the final iterate.
    iterations : int
        Number of iterations performed.
    """

    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
