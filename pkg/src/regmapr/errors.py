"""Exception types shared across the package."""


class DataError(ValueError):
    """Malformed or inconsistent input data (bad line, unknown label, missing field)."""


class NumericalError(RuntimeError):
    """Non-finite loss or gradient, or a failed gradient check."""
