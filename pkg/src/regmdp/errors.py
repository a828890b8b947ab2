"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid input data or parameters (CLI exit code 1)."""


class NumericError(RuntimeError):
    """A numeric procedure failed to converge (CLI exit code 2)."""
