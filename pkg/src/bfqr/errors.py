"""Exception types shared across the package."""


class BfqrError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(BfqrError):
    """An option or parameter combination is invalid."""


class SchemaError(BfqrError):
    """A mapped CSV column is missing or mis-declared."""


class ParseError(BfqrError):
    """A CSV cell could not be parsed; message carries row/column position."""


class EmptyInputError(BfqrError):
    """An operation received an empty sequence it cannot handle."""


class DivergenceError(BfqrError):
    """Model training produced a non-finite loss."""


class MissingGroupError(BfqrError):
    """A group id was requested that never appeared in calibration."""
