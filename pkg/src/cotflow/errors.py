"""Exception hierarchy shared by the library and the CLI.

Each class carries the process exit code the CLI maps it to, so failures
cross the command-line boundary as a single machine-parsable line instead
of a traceback.
"""


class CotFlowError(Exception):
    """Base class for all library errors."""

    exit_code = 1
    code = "internal"


class UsageError(CotFlowError):
    """Bad flags, unknown subcommands, malformed config keys."""

    exit_code = 2
    code = "usage"


class DataError(CotFlowError, ValueError):
    """Invalid values: dimension mismatches, corrupt files, bad arguments."""

    exit_code = 3
    code = "data"


class NumericError(CotFlowError, ArithmeticError):
    """Non-finite losses, failed convergence, numerically invalid state."""

    exit_code = 4
    code = "numeric"


class VersionError(CotFlowError):
    """Checkpoint format version not understood by this build."""

    exit_code = 5
    code = "version"
