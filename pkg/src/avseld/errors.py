"""Exception hierarchy.

``ValidationError`` covers bad configuration and arguments (CLI exit 1);
``DataError`` covers malformed or inconsistent input data (CLI exit 2).
"""


class AvseldError(Exception):
    exit_code = 2


class ValidationError(AvseldError, ValueError):
    exit_code = 1


class DataError(AvseldError, ValueError):
    exit_code = 2


class FormatError(DataError):
    pass


class ChannelCountError(FormatError):
    pass


class UnsupportedRateError(FormatError):
    pass


class DurationError(DataError):
    pass


class AlignmentError(DataError):
    pass


class FusionError(DataError):
    pass


class NoEstimateError(DataError):
    pass


class UnsupportedSpecError(ValidationError):
    pass
