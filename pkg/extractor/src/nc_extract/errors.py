"""Exception hierarchy for the extractor.

Exit codes live on the classes so the command-line layer can translate
any raised error without a lookup table.  The codes match the metric
engine's convention: 2 usage, 3 malformed file, 4 inconsistent data.
"""


class NcExtractError(Exception):
    exit_code = 1


class UsageError(NcExtractError):
    """Caller asked for something the tool cannot do with what it was given."""

    exit_code = 2


class FormatError(NcExtractError):
    """Malformed corpus file: not JSONL, or a line that is not token ids."""

    exit_code = 3


class DataError(NcExtractError):
    """Structurally fine inputs whose values are unusable."""

    exit_code = 4
