"""Error taxonomy shared by the library and the CLI.

Exit codes are a stable scripting contract: 0 success, 2 configuration
error, 3 data error, 4 numeric failure.
"""


class ToolError(Exception):
    """Base class for all errors this package raises deliberately."""

    exit_code = 1


class ConfigError(ToolError):
    """Invalid parameters, config files, or unsatisfiable settings."""

    exit_code = 2


class DataError(ToolError):
    """Malformed or out-of-contract input data."""

    exit_code = 3


class NumericError(ToolError):
    """Numeric breakdown (non-finite values, failed solves)."""

    exit_code = 4
