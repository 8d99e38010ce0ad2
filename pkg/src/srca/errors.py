"""Exception types shared across the package, mapped to CLI exit codes."""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class SrcaError(Exception):
    """Base class for errors raised by this package."""

    exit_code = EXIT_DATA


class UsageError(SrcaError):
    """Bad invocation: unknown flags, missing arguments, invalid combinations."""

    exit_code = EXIT_USAGE


class DataError(SrcaError):
    """Invalid or inconsistent input data.

    Carries optional file/line context so parse failures point at the
    offending record.
    """

    exit_code = EXIT_DATA

    def __init__(self, message: str, *, path=None, line: int | None = None):
        if path is not None and line is not None:
            message = f"{path}:{line}: {message}"
        elif path is not None:
            message = f"{path}: {message}"
        super().__init__(message)
        self.path = path
        self.line = line


class NumericError(SrcaError):
    """Numeric failure: non-finite values in model computations."""

    exit_code = EXIT_NUMERIC
