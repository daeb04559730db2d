"""Exception hierarchy shared by the library and the CLI.

Each error carries a machine-readable category and the process exit code the
CLI maps it to (0 success, 2 argument, 3 I/O, 4 degenerate input,
5 non-convergence).
"""


class CortexkitError(Exception):
    """Base class for all errors raised by this package."""

    category = "error"
    exit_code = 1


class UsageError(CortexkitError):
    """Invalid argument values or inconsistent argument combinations."""

    category = "argument"
    exit_code = 2


class DataFormatError(CortexkitError):
    """Malformed, unsupported, or unreadable input files."""

    category = "io"
    exit_code = 3


class ValidationError(DataFormatError):
    """File parsed but its contents violate a data contract."""

    category = "io"
    exit_code = 3


class DegenerateInputError(CortexkitError):
    """Structurally valid input on which the operation is undefined."""

    category = "degenerate"
    exit_code = 4


class ConvergenceError(CortexkitError):
    """An iterative procedure exhausted its iteration budget."""

    category = "non-convergence"
    exit_code = 5

    def __init__(self, message, reports=None):
        super().__init__(message)
        self.reports = reports
