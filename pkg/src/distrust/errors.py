"""Exception hierarchy. The CLI maps each class to a stable exit code."""


class DistrustError(Exception):
    exit_code = 4


class InputError(DistrustError, ValueError):
    """Bad input data: unreadable files, malformed CSV, schema mismatch."""

    exit_code = 2


class ModelFormatError(InputError):
    """A model file failed version, length or checksum validation."""


class ConfigError(DistrustError, ValueError):
    """Invalid parameters, flags or config-file entries."""

    exit_code = 3


class DegenerateError(DistrustError, ValueError):
    """A statistic is undefined for the given data (zero variance, no spread)."""

    exit_code = 2
