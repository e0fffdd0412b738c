class InterdictionError(Exception):
    """Base class for all errors raised by this package."""


class GraphError(InterdictionError, ValueError):
    """Malformed graph, edge list or interdiction plan."""


class ModelError(InterdictionError, ValueError):
    """An evader model cannot be built for the given graph and parameters."""


class ChainError(InterdictionError, ArithmeticError):
    """An absorbing chain violates the access condition or cannot be solved."""


class EnumerationLimitError(InterdictionError, RuntimeError):
    """A combinatorial enumeration would exceed its configured cap."""

    def __init__(self, message, count):
        super().__init__(message)
        self.count = count
