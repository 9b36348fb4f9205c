"""Quarterly/annual aggregation of the smooth factors and the band-spectrum fit.

Quarterly growth aggregates monthly growth through the (1,2,3,2,1) filter and
annual growth through the convolution of (1,1,1) with twelve ones. The factor
loadings are estimated by weighted least squares on the Fourier ordinates
restricted to a low-frequency band, with per-frequency weights given by the
spectral density of the aggregation-induced moving-average error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.signal import lfilter

from .errors import ConfigError, DataError, NumericalError
from .factor_space import FactorSeries
from .target import _fold_kernel

__all__ = [
    "AggregationFilter",
    "BandRegressionFit",
    "NowcastSeries",
    "aggregate_factors",
    "sample_at_months",
    "ma1_coefficient",
    "ma_weights",
    "fourier_band_indices",
    "band_spectrum_fit",
    "build_nowcasts",
]

HORIZONS = ("quarterly", "annual")
DEFAULT_BANDS = {"quarterly": (0.0, np.pi / 6), "annual": (0.0, np.pi / 2)}


@dataclass(frozen=True)
class AggregationFilter:
    """Finite impulse response mapping monthly growth to a growth horizon."""

    coefficients: np.ndarray
    span: int

    @classmethod
    def quarterly(cls) -> "AggregationFilter":
        c = np.array([1.0, 2.0, 3.0, 2.0, 1.0])
        return cls(c, c.size)

    @classmethod
    def annual(cls) -> "AggregationFilter":
        c = np.convolve(np.ones(3), np.ones(12))
        return cls(c, c.size)

    @property
    def total(self) -> float:
        return float(self.coefficients.sum())

    @property
    def sum_sq(self) -> float:
        return float((self.coefficients**2).sum())


def horizon_filter(horizon: str) -> AggregationFilter:
    if horizon == "quarterly":
        return AggregationFilter.quarterly()
    if horizon == "annual":
        return AggregationFilter.annual()
    raise ConfigError(f"unknown horizon {horizon!r}")


@dataclass
class BandRegressionFit:
    """Band-spectrum regression output for one horizon."""

    mu: float
    theta: np.ndarray
    sigma2: float
    band: tuple[float, float]
    band_freqs: np.ndarray
    weights: np.ndarray
    horizon: str


@dataclass
class NowcastSeries:
    """Monthly point nowcasts at the three growth horizons."""

    monthly: np.ndarray
    qoq: np.ndarray
    yoy: np.ndarray
    dates: pd.PeriodIndex | None
    fit_q: BandRegressionFit
    fit_a: BandRegressionFit


def aggregate_factors(f: np.ndarray | FactorSeries, horizon: str) -> np.ndarray:
    """Apply the horizon aggregation filter along time; NaN before full support."""
    x = f.f_phi if isinstance(f, FactorSeries) else np.asarray(f, dtype=float)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    filt = horizon_filter(horizon)
    if x.shape[1] < filt.span:
        raise DataError(
            f"series of length {x.shape[1]} is shorter than the {horizon} filter span {filt.span}"
        )
    out = lfilter(filt.coefficients, [1.0], x, axis=1)
    out[:, : filt.span - 1] = np.nan
    return out[0] if squeeze else out


def sample_at_months(agg: np.ndarray, months: np.ndarray) -> np.ndarray:
    """Systematic sample of an aggregated series at quarter-end month indices."""
    months = np.asarray(months, dtype=int)
    if months.size and (months.min() < 0 or months.max() >= agg.shape[-1]):
        raise DataError("sample months fall outside the aggregated series")
    return agg[..., months]


def ma1_coefficient() -> float:
    """Invertible MA(1) coefficient implied by quarterly sampling of the
    (1,2,3,2,1)-filtered white noise.

    The sampled error has lag-0/lag-1 autocovariances gamma0 = 19, gamma1 = 4
    (computed from the filter coefficients at monthly lag 3), so b solves
    b/(1+b^2) = gamma1/gamma0.
    """
    c = AggregationFilter.quarterly().coefficients
    gamma0 = float((c**2).sum())
    gamma1 = float((c[:-3] * c[3:]).sum())
    rho = gamma1 / gamma0
    return float((1.0 - np.sqrt(1.0 - 4.0 * rho**2)) / (2.0 * rho))


def ma_weights(horizon: str, length: int, band_indices: np.ndarray | None = None) -> np.ndarray:
    """Error-spectrum weights at the Fourier frequencies 2*pi*j/length.

    Quarterly: the MA(1) spectral shape 1 + b^2 + 2 b cos(omega). Annual: the
    folded spectral density of the annual-filtered noise, normalized to mean
    one over the band (over the full grid when no band is given).
    """
    if length < 2:
        raise ConfigError("need at least two Fourier frequencies")
    omega = 2.0 * np.pi * np.arange(length) / length
    if horizon == "quarterly":
        b = ma1_coefficient()
        return 1.0 + b**2 + 2.0 * b * np.cos(omega)
    if horizon != "annual":
        raise ConfigError(f"unknown horizon {horizon!r}")
    w = np.zeros(length)
    for j in range(3):
        w += _fold_kernel((omega + 2.0 * np.pi * j) / 3.0, "annual")
    w /= 3.0
    ref = w[band_indices] if band_indices is not None and len(band_indices) else w
    return w / ref.mean()


def fourier_band_indices(length: int, band: tuple[float, float]) -> np.ndarray:
    """Indices j with omega_j strictly inside (lo, hi) or its mirror image.

    Membership is decided on the folded frequency min(omega, 2pi - omega), so
    each conjugate pair is kept or dropped together even when a frequency
    lands exactly on the band edge. hi = pi keeps the Nyquist ordinate, which
    makes the band "every nonzero frequency".
    """
    lo, hi = band
    if not 0.0 <= lo < hi <= np.pi:
        raise ConfigError(f"band {band} must satisfy 0 <= lo < hi <= pi")
    j = np.arange(length)
    # the integer ratio is computed first so mirrored pairs (and the Nyquist
    # ordinate at exactly one half) compare identically
    folded = (2.0 * np.minimum(j, length - j) / length) * np.pi
    upper = folded <= np.pi if hi >= np.pi else folded < hi
    return np.where((folded > lo) & upper)[0]


def band_spectrum_fit(
    g: np.ndarray,
    F: np.ndarray,
    horizon: str,
    band: tuple[float, float] | None = None,
    weights: np.ndarray | None = None,
) -> BandRegressionFit:
    """Weighted frequency-domain regression of quarterly observations on
    sampled aggregated factors.

    The band excludes frequency zero, so the intercept is identified from the
    time-domain sample mean: mu = mean(g) / (filter coefficient sum). Both
    halves of each conjugate frequency pair enter the sums, making the
    loading estimate real up to roundoff. sigma2 backs out the monthly
    innovation variance through the filter's squared-coefficient sum.
    """
    g = np.asarray(g, dtype=float)
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if g.ndim != 1:
        raise DataError("quarterly observations must be 1-d")
    if F.shape[1] != g.size:
        raise DataError(f"factor sample length {F.shape[1]} != observations {g.size}")
    if not (np.isfinite(g).all() and np.isfinite(F).all()):
        raise DataError("regression inputs must be finite")
    filt = horizon_filter(horizon)
    band = band if band is not None else DEFAULT_BANDS[horizon]
    n_q = g.size
    r = F.shape[0]

    idx = fourier_band_indices(n_q, band)
    if idx.size < r + 1:
        raise DataError(
            f"only {idx.size} Fourier frequencies in band {band} for {r} loadings"
        )
    if weights is None:
        w = ma_weights(horizon, n_q, band_indices=idx)[idx]
    else:
        weights = np.asarray(weights, dtype=float)
        w = weights[idx] if weights.size == n_q else weights
        if w.size != idx.size:
            raise ConfigError("weights must cover the full grid or exactly the band")
    if np.any(w <= 0.0):
        raise ConfigError("band weights must be strictly positive")
    # conjugate pairs need equal weights or the loading estimate turns complex
    mirror = np.searchsorted(idx, (n_q - idx) % n_q)
    if not np.allclose(w, w[mirror], rtol=1e-10, atol=0.0):
        raise ConfigError("weights must be symmetric across conjugate frequency pairs")

    mu = float(g.mean()) / filt.total
    gd = g - g.mean()
    Fd = F - F.mean(axis=1, keepdims=True)
    scale = 1.0 / np.sqrt(2.0 * np.pi * n_q)
    Jg = np.fft.fft(gd) * scale
    JF = np.fft.fft(Fd, axis=1) * scale

    if r == 0:
        theta = np.zeros(0)
    else:
        JFb = JF[:, idx] / np.sqrt(w)[None, :]
        Jgb = Jg[idx] / np.sqrt(w)
        gram = JFb @ np.conj(JFb.T)
        cross = JFb @ np.conj(Jgb)
        gram = 0.5 * (gram + np.conj(gram.T))
        evals = np.linalg.eigvalsh(gram)
        if evals[0] <= 1e-12 * max(evals[-1], 1e-300):
            raise NumericalError("rank-deficient frequency-domain Gram matrix")
        theta_c = np.linalg.solve(gram, cross)
        resid_imag = float(np.abs(theta_c.imag).max())
        if resid_imag > 1e-10 * max(1.0, float(np.abs(theta_c.real).max())):
            raise NumericalError(f"loading estimate has imaginary residue {resid_imag:.3e}")
        theta = theta_c.real

    residuals = gd - theta @ Fd
    sigma2 = float((residuals**2).mean()) / filt.sum_sq
    omega = 2.0 * np.pi * idx / n_q
    return BandRegressionFit(mu, theta, sigma2, band, omega, w, horizon)


def build_nowcasts(
    fit_q: BandRegressionFit,
    fit_a: BandRegressionFit,
    factors: FactorSeries | np.ndarray,
    dates: pd.PeriodIndex | None = None,
) -> NowcastSeries:
    """Monthly, quarter-on-quarter, and year-on-year point nowcasts.

    The monthly path uses the quarterly fit's intercept and loadings on the
    raw smooth factors; each growth horizon applies its own fit to its own
    aggregated factor series.
    """
    f_phi = factors.f_phi if isinstance(factors, FactorSeries) else np.atleast_2d(factors)
    if dates is not None and len(dates) != f_phi.shape[1]:
        raise DataError("date axis does not match the factor series")
    monthly = fit_q.mu + fit_q.theta @ f_phi
    agg_q = aggregate_factors(f_phi, "quarterly")
    agg_a = aggregate_factors(f_phi, "annual")
    filt_q = horizon_filter("quarterly")
    filt_a = horizon_filter("annual")
    qoq = filt_q.total * fit_q.mu + fit_q.theta @ agg_q
    yoy = filt_a.total * fit_a.mu + fit_a.theta @ agg_a
    return NowcastSeries(monthly, qoq, yoy, dates, fit_q, fit_a)
