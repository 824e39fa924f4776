"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """An optimisation or verification step produced non-finite or inconsistent values."""


class ResourceError(RuntimeError):
    """An allocation would exceed available memory; message carries the byte estimate."""


class InputFormatError(ValueError):
    """A malformed input file; message carries row/column context where known."""
