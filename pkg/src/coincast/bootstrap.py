"""Finite-sample uncertainty of the smooth factor nowcasts.

The spectral density estimate at each frequency is resampled from a Wishart
distribution on its 2n x 2n real embedding, the factor basis and regression
are re-estimated per draw, and the resulting nowcast paths form the density
nowcast. Draws are taken on the nonnegative half of the grid and mirrored by
conjugation so every resampled covariance stays real symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .factor_space import generalized_eigs
from .nowcast import aggregate_factors, band_spectrum_fit, horizon_filter, sample_at_months
from .panel_io import Panel, QuarterlyTarget
from .pipeline import regression_sample
from .spectral import SpectrumEstimate

__all__ = [
    "WishartConfig",
    "BootstrapEnsemble",
    "real_embed",
    "wishart_draw",
    "reconstruct_complex",
    "bootstrap_nowcasts",
    "save_draws",
    "load_draws",
]

DOF_RULES = ("T_over_M", "T_star")
DECILES = np.arange(10, 100, 10)


@dataclass(frozen=True)
class WishartConfig:
    """Resampling settings; dof_rule is T/M_T or T/(M_T log M_T)."""

    B: int = 500
    dof_rule: str = "T_over_M"
    seed: int = 0
    nu_override: float | None = None  # direct degrees of freedom, for diagnostics

    def __post_init__(self) -> None:
        if self.B < 1:
            raise ConfigError("bootstrap needs at least one draw")
        if self.dof_rule not in DOF_RULES:
            raise ConfigError(f"dof_rule must be one of {DOF_RULES}")

    def dof(self, T: int, M_T: int) -> float:
        if self.nu_override is not None:
            return float(self.nu_override)
        if self.dof_rule == "T_over_M":
            return T / M_T
        return T / (M_T * np.log(M_T))


@dataclass
class BootstrapEnsemble:
    """Nowcast draws and their per-date decile bands."""

    qoq_draws: np.ndarray  # B x T
    yoy_draws: np.ndarray  # B x T
    deciles_qoq: np.ndarray  # 9 x T
    deciles_yoy: np.ndarray  # 9 x T
    seed: int
    nu: float

    @property
    def B(self) -> int:
        return self.qoq_draws.shape[0]

    def pit(self, horizon: str, values: np.ndarray) -> np.ndarray:
        """Empirical predictive CDF evaluated at the given path, ties split."""
        draws = self.qoq_draws if horizon == "quarterly" else self.yoy_draws
        values = np.asarray(values, dtype=float)
        below = (draws < values[None, :]).sum(axis=0)
        equal = (draws == values[None, :]).sum(axis=0)
        return (below + 0.5 * equal) / draws.shape[0]


def real_embed(spectrum_at_theta: np.ndarray) -> np.ndarray:
    """2n x 2n real symmetric embedding [[Re, Im], [-Im, Re]] of a Hermitian matrix."""
    s = np.asarray(spectrum_at_theta)
    re, im = s.real, s.imag
    return np.block([[re, im], [-im, re]])


def reconstruct_complex(draw: np.ndarray) -> np.ndarray:
    """Hermitian matrix from a (possibly noisy) symmetric 2n x 2n embedding.

    The real part averages the two diagonal blocks; the imaginary part is the
    skew-symmetrized off-diagonal block. Exact inverse of real_embed.
    """
    d = np.asarray(draw, dtype=float)
    n2 = d.shape[0]
    if n2 % 2:
        raise ConfigError("embedded matrix must have even dimension")
    n = n2 // 2
    re = 0.5 * (d[:n, :n] + d[n:, n:])
    re = 0.5 * (re + re.T)
    im = 0.5 * (d[:n, n:] - d[n:, :n])
    im = 0.5 * (im - im.T)
    return re + 1j * im


def wishart_draw(scale: np.ndarray, nu: float, rng: np.random.Generator) -> np.ndarray:
    """One draw with mean equal to scale: W(nu, scale/nu).

    For nu >= dim the Bartlett decomposition is used; smaller (integer) nu
    falls back to the constructive rank-nu sum of outer products, which is
    the singular Wishart the distribution degenerates to.
    """
    s = np.asarray(scale, dtype=float)
    dim = s.shape[0]
    if nu <= 0:
        raise ConfigError("degrees of freedom must be positive")
    nu_int = max(1, int(round(nu)))
    chol = _cholesky_with_ridge(s)
    if nu_int >= dim:
        diag = np.sqrt(rng.chisquare(nu_int - np.arange(dim)))
        a = np.tril(rng.standard_normal((dim, dim)), -1)
        np.fill_diagonal(a, diag)
        root = chol @ a
    else:
        root = chol @ rng.standard_normal((dim, nu_int))
    w = root @ root.T / nu_int
    return 0.5 * (w + w.T)


def _cholesky_with_ridge(s: np.ndarray) -> np.ndarray:
    ridge = 1e-12 * max(np.trace(s) / s.shape[0], 1e-30)
    for attempt in range(4):
        try:
            return np.linalg.cholesky(s if attempt == 0 else s + ridge * np.eye(s.shape[0]))
        except np.linalg.LinAlgError:
            ridge *= 100.0
    raise NumericalError("Wishart scale matrix is not positive definite after ridge repair")


def bootstrap_nowcasts(
    spectrum: SpectrumEstimate,
    panel: Panel,
    gdp: QuarterlyTarget,
    ranks: tuple[int, int, int],
    config: WishartConfig,
    theta_c: float = np.pi / 6,
) -> BootstrapEnsemble:
    """Density nowcasts by resampling the spectral estimate per frequency.

    Ranks (q, r, r_phi) are held fixed across draws. Only the band
    frequencies |theta_h| <= theta_c enter the resampled low-pass covariance,
    so draws are taken there; the sample covariance that defines the metric
    of the generalized eigenproblem stays fixed at its time-domain estimate.
    A failed draw is retried once with a spawned seed, then aborts.
    """
    q, _, r_phi = ranks
    n, T = panel.n, panel.T
    nu = config.dof(T, spectrum.M_T)
    weight = 2.0 * np.pi / (2 * spectrum.m + 1)

    in_band = np.where((spectrum.freqs >= 0.0) & (spectrum.freqs <= theta_c))[0]
    scales = [real_embed(spectrum.matrices[h]) for h in in_band]
    zero_pos = int(np.where(spectrum.freqs[in_band] == 0.0)[0][0])

    gamma0_x = panel.x @ panel.x.T / T
    obs_q, months_q = regression_sample(gdp, "quarterly", T)
    obs_a, months_a = regression_sample(gdp, "annual", T)
    filt_q_total = horizon_filter("quarterly").total
    filt_a_total = horizon_filter("annual").total

    streams = np.random.SeedSequence(config.seed).spawn(config.B)
    qoq = np.empty((config.B, T))
    yoy = np.empty((config.B, T))
    for b, stream in enumerate(streams):
        try:
            qoq[b], yoy[b] = _one_draw(
                stream, scales, zero_pos, nu, q, r_phi, weight, gamma0_x,
                panel.x, obs_q, months_q, obs_a, months_a, filt_q_total, filt_a_total,
            )
        except NumericalError:
            retry = stream.spawn(1)[0]
            qoq[b], yoy[b] = _one_draw(
                retry, scales, zero_pos, nu, q, r_phi, weight, gamma0_x,
                panel.x, obs_q, months_q, obs_a, months_a, filt_q_total, filt_a_total,
            )

    return BootstrapEnsemble(
        qoq, yoy, _column_deciles(qoq), _column_deciles(yoy), config.seed, nu
    )


def _column_deciles(draws: np.ndarray) -> np.ndarray:
    """Per-date deciles; dates inside the aggregation prefix stay NaN."""
    out = np.full((DECILES.size, draws.shape[1]), np.nan)
    ok = np.isfinite(draws).all(axis=0)
    if ok.any():
        out[:, ok] = np.percentile(draws[:, ok], DECILES, axis=0)
    return out


def _one_draw(
    stream, scales, zero_pos, nu, q, r_phi, weight, gamma0_x, x,
    obs_q, months_q, obs_a, months_a, filt_q_total, filt_a_total,
):
    rng = np.random.default_rng(stream)
    acc = np.zeros(gamma0_x.shape)
    for pos, scale in enumerate(scales):
        draw = reconstruct_complex(wishart_draw(scale, nu, rng))
        if pos == zero_pos:
            top = _top_q(draw.real, q).real
            acc += top
        else:
            top = _top_q(draw, q)
            acc += 2.0 * top.real  # the draw plus its conjugate mirror at -theta
    gamma0_phi = 0.5 * (acc + acc.T) * weight

    basis = generalized_eigs(gamma0_phi, gamma0_x, r_phi)
    f = basis.Z.T @ x
    agg_q = aggregate_factors(f, "quarterly")
    agg_a = aggregate_factors(f, "annual")
    fit_q = band_spectrum_fit(obs_q, sample_at_months(agg_q, months_q), "quarterly")
    fit_a = band_spectrum_fit(obs_a, sample_at_months(agg_a, months_a), "annual")
    qoq = filt_q_total * fit_q.mu + fit_q.theta @ agg_q
    yoy = filt_a_total * fit_a.mu + fit_a.theta @ agg_a
    return qoq, yoy


def _top_q(mat: np.ndarray, q: int) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    vals = vals[::-1][:q]
    vecs = vecs[:, ::-1][:, :q]
    return (vecs * vals[None, :]) @ np.conj(vecs.T)


# Compact columnar binary for full-draw matrices.
# Header: magic "CDRW" (4 bytes), version uint32, B uint32, T uint32,
# then the B x T float64 qoq draws followed by the B x T yoy draws,
# both row-major little-endian.
DRAWS_MAGIC = b"CDRW"
DRAWS_VERSION = 1


def save_draws(ensemble: BootstrapEnsemble, path) -> None:
    """Persist the full draw matrices in the compact columnar binary format."""
    b, t = ensemble.qoq_draws.shape
    with open(path, "wb") as fh:
        fh.write(DRAWS_MAGIC)
        fh.write(np.array([DRAWS_VERSION, b, t], dtype="<u4").tobytes())
        fh.write(ensemble.qoq_draws.astype("<f8").tobytes())
        fh.write(ensemble.yoy_draws.astype("<f8").tobytes())


def load_draws(path) -> tuple[np.ndarray, np.ndarray]:
    """Read back (qoq_draws, yoy_draws) written by save_draws."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != DRAWS_MAGIC:
            raise ConfigError(f"not a draws file: magic {magic!r}")
        version, b, t = np.frombuffer(fh.read(12), dtype="<u4")
        if version != DRAWS_VERSION:
            raise ConfigError(f"unsupported draws file version {version}")
        qoq = np.frombuffer(fh.read(8 * b * t), dtype="<f8").reshape(b, t)
        yoy = np.frombuffer(fh.read(8 * b * t), dtype="<f8").reshape(b, t)
    return qoq.copy(), yoy.copy()
