"""Shared exception types.

Errors fall into two families: domain errors (inputs outside an
operation's contract) and numerical errors (a computation that cannot
be completed reliably).  The command-line layer maps these onto
distinct exit codes.
"""


class MixvalError(Exception):
    """Base class for all package errors."""


class DomainError(MixvalError, ValueError):
    """An argument violates an operation's precondition."""


class DegenerateDataError(DomainError):
    """Input data has no usable variation (all-identical points, constant vector)."""


class GridError(DomainError):
    """A sample-size grid is too coarse or too short for the requested analysis."""


class NumericalError(MixvalError, ArithmeticError):
    """A numerical routine failed to converge or produced a non-finite result."""


class ConfigError(MixvalError, ValueError):
    """A run configuration is missing, malformed, or holds unknown keys."""
