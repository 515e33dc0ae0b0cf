"""Exception types shared across the package."""


class DataFormatError(ValueError):
    """Malformed input file or record; carries a line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericalError(RuntimeError):
    """Unrecoverable numerical failure (e.g. a Gram matrix that cannot be factorized)."""
