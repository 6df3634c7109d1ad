"""Exception hierarchy shared across the package.

Process-level exit codes are attached to the classes so the command-line
layer can translate any raised error without a lookup table.
"""


class NcMeterError(Exception):
    exit_code = 1


class UsageError(NcMeterError):
    """Caller asked for something the tool cannot do with what it was given."""

    exit_code = 2


class FormatError(NcMeterError):
    """Malformed container: bad magic, bad header field, or size mismatch."""

    exit_code = 3


class TruncationError(FormatError):
    """Stream ended mid-record or short of its declared record count."""


class DataError(NcMeterError):
    """Well-formed container holding invalid payload values."""

    exit_code = 4


class CorruptionError(DataError):
    """Statistics checkpoint violating its own structural invariants."""


class DegenerateInputError(NcMeterError):
    """Inputs too small or too flat for the requested computation."""

    exit_code = 5
