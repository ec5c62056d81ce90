"""Exception types shared across the library.

Two failure classes matter to callers (and map to CLI exit codes):
rejected inputs and numerical breakdowns discovered mid-computation.
"""


class InputValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


class NumericalError(RuntimeError):
    """Raised when a computation fails numerically (divergence, NaN, ...)."""
