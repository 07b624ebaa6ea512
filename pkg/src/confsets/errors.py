"""Shared exception types."""


class ValidationError(ValueError):
    """Raised when inputs violate a documented precondition or invariant.

    The CLI maps this to exit code 1; genuine I/O failures (OSError) map
    to exit code 2.
    """
