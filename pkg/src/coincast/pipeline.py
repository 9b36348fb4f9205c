"""Single-window estimation: spectrum -> factor basis -> band fits -> nowcasts.

Shared by the rolling evaluation harness, the bootstrap resampler, and the
command-line entry points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .factor_space import (
    FactorSeries,
    RankConfig,
    SmoothFactorBasis,
    build_smooth_basis,
    component_covariances,
    select_ranks,
    smooth_factors,
)
from .nowcast import (
    BandRegressionFit,
    NowcastSeries,
    aggregate_factors,
    band_spectrum_fit,
    build_nowcasts,
    horizon_filter,
    sample_at_months,
)
from .panel_io import Panel, QuarterlyTarget
from .spectral import SpectrumEstimate, bartlett_spectrum, cross_covariances, hermitian_eig

__all__ = ["PipelineParams", "WindowEstimate", "fit_factor_nowcast", "estimate_window"]


@dataclass(frozen=True)
class PipelineParams:
    """Estimation settings for one window."""

    M_T: int = 20
    m: int = 75
    theta_c: float = np.pi / 6
    ranks: RankConfig = field(default_factory=RankConfig)
    rank_floor: int = 1


@dataclass
class WindowEstimate:
    """Everything estimated on one window."""

    panel: Panel
    spectrum: SpectrumEstimate
    basis: SmoothFactorBasis
    factors: FactorSeries
    nowcasts: NowcastSeries
    q: int
    r: int
    r_phi: int


def regression_sample(
    gdp: QuarterlyTarget, horizon: str, n_months: int
) -> tuple[np.ndarray, np.ndarray]:
    """Quarter observations and their month indices usable for one horizon.

    Keeps quarters whose growth rate is observed and whose end month both
    falls inside the window and leaves room for the aggregation filter span.
    """
    filt = horizon_filter(horizon)
    values = gdp.g if horizon == "quarterly" else gdp.a
    months = gdp.quarter_end_months
    keep = (
        np.isfinite(values)
        & (months >= filt.span - 1)
        & (months < n_months)
    )
    if keep.sum() < 8:
        raise DataError(
            f"only {int(keep.sum())} usable quarters for the {horizon} regression"
        )
    return values[keep], months[keep]


def fit_factor_nowcast(
    f_phi: np.ndarray,
    panel: Panel,
    gdp: QuarterlyTarget,
) -> NowcastSeries:
    """Fit both horizons on a given factor path and emit the nowcast series."""
    fits: dict[str, BandRegressionFit] = {}
    for horizon in ("quarterly", "annual"):
        obs, months = regression_sample(gdp, horizon, panel.T)
        agg = aggregate_factors(f_phi, horizon)
        sampled = sample_at_months(agg, months)
        fits[horizon] = band_spectrum_fit(obs, sampled, horizon)
    return build_nowcasts(fits["quarterly"], fits["annual"], f_phi, panel.dates)


def estimate_window(
    panel: Panel,
    gdp: QuarterlyTarget,
    params: PipelineParams,
    use_pca_factors: bool = False,
) -> WindowEstimate:
    """Full factor nowcast pipeline on one standardized panel window.

    With use_pca_factors the smooth generalized principal components are
    replaced by standard principal components (the SW competitor); everything
    else is identical.
    """
    covs = cross_covariances(panel, params.M_T)
    spectrum = bartlett_spectrum(covs, params.m)
    eig = hermitian_eig(spectrum)
    q, r, r_phi = select_ranks(panel, spectrum, params.ranks, eig=eig)
    q = max(q, params.rank_floor)
    r = max(r, q, params.rank_floor)
    r_phi = max(min(r_phi, r), params.rank_floor)

    cc = component_covariances(covs, eig, q, params.theta_c)
    basis = build_smooth_basis(cc, r, r_phi)
    factors = smooth_factors(panel, basis)
    path = factors.f_pca if use_pca_factors else factors.f_phi
    nowcasts = fit_factor_nowcast(path, panel, gdp)
    return WindowEstimate(panel, spectrum, basis, factors, nowcasts, q, r, r_phi)
