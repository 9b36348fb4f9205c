"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
NumericalError -> 3.
"""


class CoincastError(Exception):
    """Base class for package errors."""


class ConfigError(CoincastError):
    """Invalid configuration value, missing key, or bad parameter range."""


class DataError(CoincastError):
    """Malformed, misaligned, or insufficient input data."""


class TransformError(DataError):
    """A stationarity transform hit an invalid value (e.g. log of x <= 0)."""


class NumericalError(CoincastError):
    """A numerical routine failed beyond repair (singularity, no convergence)."""
