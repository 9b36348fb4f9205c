"""Synthetic panels with a controllable smooth/rough factor split.

The common component is driven by q white-noise shocks split into orthogonal
low-pass and high-pass parts through the squared-trigonometric filter pair,
so the ground-truth smooth component is available for consistency tests. The
idiosyncratic block is AR(1) in time with exponentially decaying spatial
correlation, keeping its covariance eigenvalues bounded in n.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
import pandas as pd
from scipy.linalg import toeplitz
from scipy.signal import lfilter

from .errors import ConfigError
from .nowcast import AggregationFilter
from .panel_io import Panel, QuarterlyTarget
from .target import spectral_factorize

__all__ = ["DgpSpec", "SimTruth", "GdpTruth", "simulate_panel", "simulate_gdp", "population_covariances"]


@dataclass
class DgpSpec:
    """Parameters of the synthetic monthly factor model.

    With r_smooth = None every common shock carries both a low-pass and a
    high-pass part, so the smooth and rough components share one loading
    space. Setting r_smooth = k < r instead drives the first k factors purely
    through the low-pass channel and the rest purely through the high-pass
    channel, which separates the two spaces cross-sectionally (the
    identification condition behind consistent smooth-factor recovery);
    split mode requires a diagonal factor VAR.
    """

    n: int
    T: int
    q: int = 2
    r: int = 2
    p: int = 1
    loadings: np.ndarray | None = None  # n x r, drawn N(0,1) per seed when None
    d_coeffs: np.ndarray | None = None  # (p, r, r) VAR matrices, default stable diagonal
    k_mat: np.ndarray | None = None  # r x q shock loading, default [I_q; N(0,1)/sqrt(q)]
    s: int = 6
    theta_c: float = np.pi / 6
    idio_ar: float = 0.5
    idio_cross: float = 0.5
    idio_scale: float = 1.0
    r_smooth: int | None = None
    seed: int = 0
    burn_in: int = 500


@dataclass
class SimTruth:
    """Ground-truth components in the standardized units of the panel."""

    chi: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    f: np.ndarray  # r x T common factors
    f_phi: np.ndarray  # r x T low-pass part of the factors
    stds: np.ndarray


@dataclass
class GdpTruth:
    """Monthly growth truth behind a simulated quarterly GDP sample."""

    delta_y: np.ndarray
    m2lr_monthly: np.ndarray
    m2lr_qoq: np.ndarray
    m2lr_yoy: np.ndarray
    mu: float
    theta: np.ndarray


def _materialize(spec: DgpSpec, rng: np.random.Generator):
    if spec.r < spec.q:
        raise ConfigError(f"static rank r={spec.r} cannot be below dynamic rank q={spec.q}")
    if not 0.0 <= spec.idio_cross < 1.0:
        raise ConfigError("idio_cross must lie in [0, 1)")
    if spec.r_smooth is not None and not 1 <= spec.r_smooth < spec.r:
        raise ConfigError(f"r_smooth={spec.r_smooth} must lie in 1..r-1")
    loadings = spec.loadings
    if loadings is None:
        loadings = rng.standard_normal((spec.n, spec.r))
    loadings = np.asarray(loadings, dtype=float)
    if loadings.shape != (spec.n, spec.r):
        raise ConfigError(f"loadings must be {spec.n} x {spec.r}")

    if spec.d_coeffs is None:
        base = np.linspace(0.7, 0.2, spec.r)
        d = np.zeros((spec.p, spec.r, spec.r))
        d[0] = np.diag(base)
    else:
        d = np.asarray(spec.d_coeffs, dtype=float)
        if d.ndim == 2:
            d = d[None]
        if d.shape != (spec.p, spec.r, spec.r):
            raise ConfigError(f"d_coeffs must be ({spec.p}, {spec.r}, {spec.r})")
    companion = np.zeros((spec.r * spec.p, spec.r * spec.p))
    companion[: spec.r] = np.concatenate(list(d), axis=1)
    if spec.p > 1:
        companion[spec.r :, : spec.r * (spec.p - 1)] = np.eye(spec.r * (spec.p - 1))
    radius = np.abs(np.linalg.eigvals(companion)).max()
    if radius >= 1.0:
        raise ConfigError(f"factor VAR is unstable (companion radius {radius:.3f})")

    k_mat = spec.k_mat
    if k_mat is None:
        k_mat = np.vstack(
            [np.eye(spec.q), rng.standard_normal((spec.r - spec.q, spec.q)) / np.sqrt(spec.q)]
        )
    k_mat = np.asarray(k_mat, dtype=float)
    if k_mat.shape != (spec.r, spec.q):
        raise ConfigError(f"k_mat must be {spec.r} x {spec.q}")
    return loadings, d, k_mat


def _var_filter(d: np.ndarray, shocks: np.ndarray) -> np.ndarray:
    """Run f_t = sum_j D_j f_{t-j} + shocks_t from zero initial conditions."""
    p, r, _ = d.shape
    T = shocks.shape[1]
    out = np.zeros((r, T))
    for t in range(T):
        acc = shocks[:, t].copy()
        for j in range(1, min(p, t) + 1):
            acc += d[j - 1] @ out[:, t - j]
        out[:, t] = acc
    return out


def simulate_panel(spec: DgpSpec, start: str = "1959-01") -> tuple[Panel, SimTruth]:
    """Draw one panel; returns the standardized panel and its true components."""
    rng = np.random.default_rng(spec.seed)
    loadings, d, k_mat = _materialize(spec, rng)
    total = spec.T + spec.burn_in

    butter = spectral_factorize(spec.s, spec.theta_c)
    num_low = np.array([comb(spec.s, j) for j in range(spec.s + 1)], dtype=float)
    num_high = num_low * (-1.0) ** np.arange(spec.s + 1)

    if spec.r_smooth is None:
        eta = rng.standard_normal((spec.q, total))
        zeta = rng.standard_normal((spec.q, total))
        u_low = lfilter(num_low, butter.phi_coeffs, eta, axis=1)
        u_high = np.sqrt(butter.varsigma) * lfilter(num_high, butter.phi_coeffs, zeta, axis=1)
        f_low = _var_filter(d, k_mat @ u_low)
        f_high = _var_filter(d, k_mat @ u_high)
    else:
        k = spec.r_smooth
        _require_diagonal_var(d)
        eta = rng.standard_normal((k, total))
        zeta = rng.standard_normal((spec.r - k, total))
        shocks_low = np.zeros((spec.r, total))
        shocks_low[:k] = lfilter(num_low, butter.phi_coeffs, eta, axis=1)
        shocks_high = np.zeros((spec.r, total))
        shocks_high[k:] = np.sqrt(butter.varsigma) * lfilter(
            num_high, butter.phi_coeffs, zeta, axis=1
        )
        f_low = _var_filter(d, shocks_low)
        f_high = _var_filter(d, shocks_high)
    f = f_low + f_high

    sigma_cross = toeplitz(spec.idio_cross ** np.arange(spec.n))
    chol = np.linalg.cholesky(sigma_cross)
    innov = spec.idio_scale * (chol @ rng.standard_normal((spec.n, total)))
    xi = lfilter([1.0], [1.0, -spec.idio_ar], innov, axis=1)

    chi = loadings @ f
    x = chi + xi
    sl = slice(spec.burn_in, total)
    x, chi, f, f_low = x[:, sl], chi[:, sl], f[:, sl], f_low[:, sl]

    means = x.mean(axis=1)
    stds = x.std(axis=1)
    if np.any(stds <= 0.0):
        raise ConfigError("degenerate simulated series; increase T or noise scale")
    z = (x - means[:, None]) / stds[:, None]
    dates = pd.period_range(start, periods=spec.T, freq="M")
    panel = Panel(z, dates, means, stds, [f"sim{i:03d}" for i in range(spec.n)])

    phi = (loadings @ f_low) / stds[:, None]
    chi_s = chi / stds[:, None]
    f_phi = f_low if spec.r_smooth is None else f_low[: spec.r_smooth]
    truth = SimTruth(chi_s, phi, chi_s - phi, f, f_phi, stds)
    return panel, truth


def _require_diagonal_var(d: np.ndarray) -> None:
    off = d - np.stack([np.diag(np.diag(block)) for block in d])
    if np.abs(off).max() > 0.0:
        raise ConfigError("split mode (r_smooth set) requires a diagonal factor VAR")


def simulate_gdp(
    truth: SimTruth,
    loading: np.ndarray,
    noise_sd: float,
    mu: float = 0.0,
    seed: int = 1,
    panel: Panel | None = None,
) -> tuple[QuarterlyTarget, GdpTruth]:
    """Monthly growth driven by the smooth factors, observed quarterly.

    delta_y_t = mu + loading' f_phi_t + eps_t with white measurement noise.
    The quarterly and annual log growth are the aggregation-filter outputs
    sampled at quarter-end months (indices 2, 5, 8, ...), and the true
    medium-to-long-run paths retain the noiseless aggregated component.
    """
    rng = np.random.default_rng(seed)
    f_phi = truth.f_phi
    loading = np.asarray(loading, dtype=float)
    if loading.shape != (f_phi.shape[0],):
        raise ConfigError(f"loading must have length {f_phi.shape[0]}")
    T = f_phi.shape[1]
    signal = loading @ f_phi
    delta_y = mu + signal + noise_sd * rng.standard_normal(T)

    filt_q = AggregationFilter.quarterly()
    filt_a = AggregationFilter.annual()
    w_q = lfilter(filt_q.coefficients, [1.0], delta_y)
    w_a = lfilter(filt_a.coefficients, [1.0], delta_y)
    m2lr_q = filt_q.total * mu + lfilter(filt_q.coefficients, [1.0], signal)
    m2lr_a = filt_a.total * mu + lfilter(filt_a.coefficients, [1.0], signal)
    w_q[: filt_q.span - 1] = np.nan
    w_a[: filt_a.span - 1] = np.nan
    m2lr_q[: filt_q.span - 1] = np.nan
    m2lr_a[: filt_a.span - 1] = np.nan

    ends = np.arange(2, T, 3)
    g = w_q[ends]
    a = w_a[ends]
    if panel is not None:
        quarters = pd.PeriodIndex([panel.dates[i].asfreq("Q") for i in ends])
    else:
        quarters = pd.period_range("1959Q1", periods=len(ends), freq="Q")
    gdp = QuarterlyTarget(g, a, ends, quarters)
    return gdp, GdpTruth(delta_y, mu + signal, m2lr_q, m2lr_a, mu, loading)


def population_covariances(
    spec: DgpSpec, grid_size: int = 4096
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact covariances (gamma0_x, gamma0_chi, gamma0_phi) of the model.

    Computed by integrating the factor spectral density on a fine frequency
    grid; used as oracles when testing the finite-n estimation theory.
    """
    rng = np.random.default_rng(spec.seed)
    loadings, d, k_mat = _materialize(spec, rng)
    butter = spectral_factorize(spec.s, spec.theta_c)

    thetas = (np.arange(grid_size) + 0.5) * (2.0 * np.pi / grid_size)
    gain = butter.gain(thetas)
    gamma_f = np.zeros((spec.r, spec.r))
    gamma_f_low = np.zeros((spec.r, spec.r))
    eye = np.eye(spec.r)
    for theta, w in zip(thetas, gain):
        z = np.exp(-1j * theta)
        dz = eye - sum(d[j] * z ** (j + 1) for j in range(spec.p))
        if spec.r_smooth is None:
            h = np.linalg.solve(dz, k_mat)
            s_f = (h @ np.conj(h.T)).real / (2.0 * np.pi)
            s_low = w * s_f
        else:
            k = spec.r_smooth
            h = np.linalg.inv(dz)
            w_diag = np.concatenate([np.full(k, w), np.full(spec.r - k, 1.0 - w)])
            s_f = (h * w_diag[None, :]) @ np.conj(h.T)
            s_f = s_f.real / (2.0 * np.pi)
            w_low = np.concatenate([np.full(k, w), np.zeros(spec.r - k)])
            s_low = ((h * w_low[None, :]) @ np.conj(h.T)).real / (2.0 * np.pi)
        gamma_f += s_f
        gamma_f_low += s_low
    step = 2.0 * np.pi / grid_size
    gamma_f *= step
    gamma_f_low *= step

    gamma0_chi = loadings @ gamma_f @ loadings.T
    gamma0_phi = loadings @ gamma_f_low @ loadings.T
    gamma0_xi = (
        toeplitz(spec.idio_cross ** np.arange(spec.n))
        * spec.idio_scale**2
        / (1.0 - spec.idio_ar**2)
    )
    return gamma0_chi + gamma0_xi, gamma0_chi, gamma0_phi
