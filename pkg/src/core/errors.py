"""
Exception hierarchy shared by the solver, index and simulation layers
"""

from typing import Optional


class RelaySelError(Exception):
    """Base class for every error raised by relaysel"""


class DomainError(RelaySelError, ValueError):
    """A state or parameter lies outside the domain of an operation"""


class SolverError(RelaySelError):
    """The linear system for a threshold policy could not be solved"""

    def __init__(self, message: str, pivot: Optional[int] = None):
        super().__init__(message)
        self.pivot = pivot


class ConvergenceError(RelaySelError):
    """An iterative method ran out of iterations"""

    def __init__(self, message: str, last_value: float, residual: float, iterations: int):
        super().__init__(message)
        self.last_value = last_value
        self.residual = residual
        self.iterations = iterations


class DegenerateIndexError(RelaySelError):
    """The affine fixed-point map has unit slope, so it has no unique solution"""

    def __init__(self, message: str, slope: float):
        super().__init__(message)
        self.slope = slope


class StateSpaceTooLargeError(RelaySelError):
    """The joint chain is too large for the brute-force solver"""


class ConfigError(RelaySelError, ValueError):
    """A scenario file is malformed or violates an invariant"""

    def __init__(self, message: str, field: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[int] = None):
        location = ""
        if field:
            location += f" [field: {field}]"
        if line is not None:
            location += f" [line {line}, column {column}]"
        super().__init__(message + location)
        self.field = field
        self.line = line
        self.column = column


class PolicyConfigError(RelaySelError):
    """A policy is missing something it needs, e.g. index tables"""
