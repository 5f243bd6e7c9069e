"""Exception hierarchy shared by every stage of the pipeline."""


class MiaceError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(MiaceError, ValueError):
    """Input data or configuration violates a documented invariant."""


class ParseError(ValidationError):
    """A file could not be parsed. ``line`` is 1-based and counts the header."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DimensionError(ValidationError):
    """Feature vectors disagree on dimensionality."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(ValidationError):
    pass


class EstimationError(MiaceError):
    """Background statistics cannot be estimated from the supplied data."""


class StaleSignatureError(MiaceError):
    """A signature is applied with background statistics it was not trained against."""


class DegenerateUpdateError(MiaceError):
    """The signature update direction vanished."""


class InitializationError(MiaceError):
    """No usable initial signature candidate was found."""


class ClusteringError(MiaceError):
    pass
