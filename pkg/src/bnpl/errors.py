"""Exception types shared across the package."""


class BnplError(Exception):
    """Base class for errors raised by this package."""


class DataError(BnplError):
    """Malformed input data (rankings files, trace files)."""


class ConfigError(BnplError):
    """Invalid run configuration."""
