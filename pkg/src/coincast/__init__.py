"""Monthly nowcasting of the medium-to-long-run component of GDP growth.

The pipeline extracts smooth (low-pass) common factors from a large monthly
panel by generalized principal components of a band-restricted spectral
covariance, projects quarterly GDP growth on them by band-spectrum
regression, and emits monthly point and density nowcasts together with an
evaluation harness against a two-sided filtered oracle target.
"""

from .errors import CoincastError, ConfigError, DataError, NumericalError, TransformError

__version__ = "0.1.0"

__all__ = [
    "CoincastError",
    "ConfigError",
    "DataError",
    "NumericalError",
    "TransformError",
    "__version__",
]
