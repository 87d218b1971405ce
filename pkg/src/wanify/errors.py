"""Shared exception types."""


class ValidationError(ValueError):
    """Bad input that the caller should have caught: malformed matrices,
    out-of-range parameters, schema mismatches. The CLI maps this to exit 2."""
