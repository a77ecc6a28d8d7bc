"""Error taxonomy shared across the toolkit.

Exit codes used by the CLI: 0 success, 2 config, 3 data, 4 segmenter.
"""


class ClicksegError(Exception):
    exit_code = 1


class ConfigError(ClicksegError):
    """Invalid configuration or parameters."""

    exit_code = 2


class DataError(ClicksegError):
    """Malformed or inconsistent input data."""

    exit_code = 3


class FormatError(DataError):
    """Binary/text file does not match the expected layout."""


class InputError(DataError):
    """Caller violated an operation precondition."""


class SegmenterError(ClicksegError):
    """External or internal segmenter failure."""

    exit_code = 4
