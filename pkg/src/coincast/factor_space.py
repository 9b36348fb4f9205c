"""Smooth generalized principal components.

Builds the common and low-pass covariance matrices from the spectral
estimate, solves the symmetric-definite generalized eigenproblem in the
metric of the sample covariance, and emits the factor series together with
the standard-PCA competitor basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError
from .panel_io import Panel
from .spectral import CrossCovarianceSet, FrequencyEigenSystem, SpectrumEstimate, hermitian_eig

__all__ = [
    "ComponentCovariances",
    "EigenBasis",
    "SmoothFactorBasis",
    "FactorSeries",
    "RankConfig",
    "common_covariance",
    "lowpass_covariance",
    "component_covariances",
    "generalized_eigs",
    "build_smooth_basis",
    "smooth_factors",
    "select_ranks",
    "bai_ng_r",
    "hallin_liska_q",
    "dump_basis",
]

IMAG_TOL = 1e-8
RIDGE_SCALE = 1e-8
MIN_EIGENVALUE = 1e-10


@dataclass
class ComponentCovariances:
    """Covariance matrices entering the generalized eigenproblems."""

    gamma0_x: np.ndarray
    gamma0_chi: np.ndarray
    gamma0_phi: np.ndarray
    q: int
    theta_c: float
    m_c: int


@dataclass
class EigenBasis:
    """One solved generalized eigenproblem: weights Z, eigenvalues, loadings A."""

    Z: np.ndarray  # n x rank
    mu_star: np.ndarray  # (rank,) descending
    A: np.ndarray  # n x rank, equals gamma0_x @ Z


@dataclass
class SmoothFactorBasis:
    """Low-pass and full-rank common bases plus the PCA competitor directions."""

    Z_phi: np.ndarray
    M_star: np.ndarray
    A_phi: np.ndarray
    r_phi: int
    Z_chi: np.ndarray
    M_star_chi: np.ndarray
    A_chi: np.ndarray
    r: int
    P_phi: np.ndarray
    P_chi: np.ndarray
    s_r: np.ndarray  # top-r eigenvectors of gamma0_x (standard PCA)


@dataclass
class FactorSeries:
    """Factor paths: rows are factors, columns are months."""

    f_phi: np.ndarray
    f_chi: np.ndarray
    f_pca: np.ndarray


@dataclass(frozen=True)
class RankConfig:
    """Fixed ranks or criterion settings for (q, r, r_phi) selection."""

    q: int | None = None
    r: int | None = None
    r_phi: int | None = None
    k_max: int = 10
    theta_c: float = np.pi / 6
    hl_penalty_grid: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0, 1.5, 2.0)


def _riemann_weight(m: int) -> float:
    # integral weight, shared by the full-band and band-restricted sums so
    # that gamma0_phi + gamma0_psi = gamma0_chi and the mu* <= 1 bound hold
    return 2.0 * np.pi / (2 * m + 1)


def _truncated_reconstruction(eig: FrequencyEigenSystem, q: int, indices: np.ndarray) -> np.ndarray:
    vals = eig.eigvals[indices, :q]
    vecs = eig.eigvecs[indices, :, :q]
    acc = np.einsum("hik,hk,hjk->ij", vecs, vals, np.conj(vecs))
    return acc


def _to_real_symmetric(acc: np.ndarray, what: str) -> np.ndarray:
    scale = max(1.0, float(np.abs(acc).max()))
    resid = float(np.abs(acc.imag).max())
    if resid > IMAG_TOL * scale:
        raise NumericalError(f"{what}: imaginary residue {resid:.3e} above tolerance")
    out = acc.real
    return 0.5 * (out + out.T)


def common_covariance(eig: FrequencyEigenSystem, q: int) -> np.ndarray:
    """Covariance of the common component: Riemann sum of the rank-q spectra."""
    n = eig.n
    if not 1 <= q <= n:
        raise ConfigError(f"dynamic rank q={q} must lie in 1..{n}")
    acc = _truncated_reconstruction(eig, q, np.arange(len(eig.freqs)))
    return _to_real_symmetric(acc * _riemann_weight(eig.m), "common covariance")


def lowpass_covariance(
    eig: FrequencyEigenSystem, q: int, theta_c: float
) -> tuple[np.ndarray, int]:
    """Band-restricted covariance over |theta_h| <= theta_c, plus the band half-width."""
    n = eig.n
    if not 1 <= q <= n:
        raise ConfigError(f"dynamic rank q={q} must lie in 1..{n}")
    if not 0.0 < theta_c <= np.pi:
        raise ConfigError(f"cutoff theta_c={theta_c} must lie in (0, pi]")
    in_band = np.abs(eig.freqs) <= theta_c
    if not in_band.any():
        raise ConfigError("empty frequency band")
    m_c = int(np.sum(in_band[eig.m + 1 :]))
    acc = _truncated_reconstruction(eig, q, np.where(in_band)[0])
    return _to_real_symmetric(acc * _riemann_weight(eig.m), "low-pass covariance"), m_c


def component_covariances(
    covs: CrossCovarianceSet, eig: FrequencyEigenSystem, q: int, theta_c: float
) -> ComponentCovariances:
    gamma0_phi, m_c = lowpass_covariance(eig, q, theta_c)
    return ComponentCovariances(
        gamma0_x=0.5 * (covs.gammas[0] + covs.gammas[0].T),
        gamma0_chi=common_covariance(eig, q),
        gamma0_phi=gamma0_phi,
        q=q,
        theta_c=theta_c,
        m_c=m_c,
    )


def generalized_eigs(
    gamma0_target: np.ndarray, gamma0_x: np.ndarray, rank: int
) -> EigenBasis:
    """Top generalized eigenpairs of (gamma0_target, gamma0_x).

    Returns Z with Z' gamma0_x Z = I and Z' gamma0_target Z = diag(mu_star),
    solved by whitening with the eigendecomposition of gamma0_x. A ridge of
    RIDGE_SCALE * trace/n is added when gamma0_x is numerically singular.
    Each column of Z is flipped so the largest-magnitude loading is positive.
    """
    gx = 0.5 * (np.asarray(gamma0_x, float) + np.asarray(gamma0_x, float).T)
    gt = 0.5 * (np.asarray(gamma0_target, float) + np.asarray(gamma0_target, float).T)
    n = gx.shape[0]
    if not 1 <= rank <= n:
        raise ConfigError(f"rank={rank} must lie in 1..{n}")

    mu_x, S = np.linalg.eigh(gx)
    if mu_x[0] < MIN_EIGENVALUE:
        gx = gx + np.eye(n) * (RIDGE_SCALE * np.trace(gx) / n)
        mu_x, S = np.linalg.eigh(gx)
        if mu_x[0] < MIN_EIGENVALUE:
            raise NumericalError(
                f"sample covariance singular beyond ridge repair (min eig {mu_x[0]:.3e})"
            )
    mu_x = mu_x[::-1]
    S = S[:, ::-1]
    inv_sqrt = 1.0 / np.sqrt(mu_x)

    Q = (inv_sqrt[:, None] * (S.T @ gt @ S)) * inv_sqrt[None, :]
    Q = 0.5 * (Q + Q.T)
    mu_star, Zstar = np.linalg.eigh(Q)
    mu_star = mu_star[::-1][:rank]
    Zstar = Zstar[:, ::-1][:, :rank]

    Z = S @ (inv_sqrt[:, None] * Zstar)
    A = S @ (np.sqrt(mu_x)[:, None] * Zstar)

    # sign convention: largest-magnitude loading positive
    pivot = np.abs(A).argmax(axis=0)
    signs = np.sign(A[pivot, np.arange(rank)])
    signs[signs == 0.0] = 1.0
    Z = Z * signs
    A = A * signs

    gram = Z.T @ gx @ Z
    if np.abs(gram - np.eye(rank)).max() > 1e-6:
        raise NumericalError("generalized eigenvectors lost gamma0_x-orthonormality")
    return EigenBasis(Z, mu_star, A)


def build_smooth_basis(cc: ComponentCovariances, r: int, r_phi: int) -> SmoothFactorBasis:
    """Solve both generalized eigenproblems and the standard PCA competitor."""
    if r_phi > r:
        raise ConfigError(f"r_phi={r_phi} cannot exceed r={r}")
    chi = generalized_eigs(cc.gamma0_chi, cc.gamma0_x, r)
    phi = generalized_eigs(cc.gamma0_phi, cc.gamma0_x, r_phi)
    vals, vecs = np.linalg.eigh(cc.gamma0_x)
    s_r = vecs[:, ::-1][:, :r]
    pivot = np.abs(s_r).argmax(axis=0)
    signs = np.sign(s_r[pivot, np.arange(r)])
    signs[signs == 0.0] = 1.0
    s_r = s_r * signs
    return SmoothFactorBasis(
        Z_phi=phi.Z,
        M_star=phi.mu_star,
        A_phi=phi.A,
        r_phi=r_phi,
        Z_chi=chi.Z,
        M_star_chi=chi.mu_star,
        A_chi=chi.A,
        r=r,
        P_phi=phi.A @ phi.Z.T,
        P_chi=chi.A @ chi.Z.T,
        s_r=s_r,
    )


def smooth_factors(panel: Panel | np.ndarray, basis: SmoothFactorBasis) -> FactorSeries:
    """Project the panel on the smooth, common, and PCA directions."""
    x = panel.x if isinstance(panel, Panel) else np.asarray(panel, dtype=float)
    if x.shape[0] != basis.Z_phi.shape[0]:
        raise ConfigError(
            f"panel has {x.shape[0]} series but the basis was built for {basis.Z_phi.shape[0]}"
        )
    return FactorSeries(
        f_phi=basis.Z_phi.T @ x,
        f_chi=basis.Z_chi.T @ x,
        f_pca=basis.s_r.T @ x,
    )


def bai_ng_r(eigenvalues: np.ndarray, n: int, T: int, k_max: int) -> int:
    """Static rank by the ICp2 information criterion.

    V(k) is the mean squared residual after removing k principal components,
    computed from the covariance eigenvalues; the penalty is
    k * ((n + T)/(n T)) * log(min(n, T)).
    """
    if k_max >= min(n, T):
        raise ConfigError(f"k_max={k_max} must be below min(n, T)={min(n, T)}")
    mu = np.sort(np.asarray(eigenvalues, float))[::-1]
    mu = np.clip(mu, 0.0, None)
    penalty = (n + T) / (n * T) * np.log(min(n, T))
    # floor the residual at a relative epsilon so an exactly rank-k input
    # does not let the criterion chase numerical dust down to k_max
    floor = max(float(mu.sum()) / n, 1e-300) * 1e-12
    best_k, best_ic = 0, np.inf
    for k in range(k_max + 1):
        v = max(float(mu[k:].sum()) / n, floor)
        ic = np.log(v) + k * penalty
        if ic < best_ic - 1e-12:
            best_k, best_ic = k, ic
    return best_k


def hallin_liska_q(
    eig: FrequencyEigenSystem,
    T: int,
    M_T: int,
    k_max: int,
    penalty_grid: tuple[float, ...],
) -> int:
    """Dynamic rank by a simplified penalty scan over averaged dynamic eigenvalues.

    For each penalty constant c, minimizes log of the residual spectral mass
    per series plus k * c * ((n + T)/(n T)) * log(min(n, T)); the modal
    minimizer across the grid is returned. This is a documented
    simplification of the original log-criterion with subsample stability.
    """
    n = eig.n
    if k_max >= min(n, T):
        raise ConfigError(f"k_max={k_max} must be below min(n, T)={min(n, T)}")
    d = eig.eigvals.mean(axis=0) * (2.0 * np.pi)  # spectral mass per eigenvalue
    d = np.clip(d, 0.0, None)
    penalty = (n + T) / (n * T) * np.log(min(n, T))
    floor = max(float(d.sum()) / n, 1e-300) * 1e-12
    picks = []
    for c in penalty_grid:
        best_k, best_ic = 0, np.inf
        for k in range(k_max + 1):
            v = max(float(d[k:].sum()) / n, floor)
            ic = np.log(v) + k * c * penalty
            if ic < best_ic - 1e-12:
                best_k, best_ic = k, ic
        picks.append(best_k)
    values, counts = np.unique(picks, return_counts=True)
    return int(values[np.argmax(counts)])


def dump_basis(basis: SmoothFactorBasis, factors: FactorSeries, prefix) -> None:
    """Write the bases and factor paths as CSVs for inspection."""
    import pandas as pd

    cols_phi = [f"phi{k + 1}" for k in range(basis.r_phi)]
    cols_chi = [f"chi{k + 1}" for k in range(basis.r)]
    pd.DataFrame(basis.Z_phi, columns=cols_phi).to_csv(f"{prefix}_weights_phi.csv", index=False)
    pd.DataFrame(basis.A_phi, columns=cols_phi).to_csv(f"{prefix}_loadings_phi.csv", index=False)
    pd.DataFrame({"mu_star": basis.M_star}).to_csv(f"{prefix}_mu_star.csv", index=False)
    pd.DataFrame(factors.f_phi.T, columns=cols_phi).to_csv(f"{prefix}_factors_phi.csv", index=False)
    pd.DataFrame(factors.f_chi.T, columns=cols_chi).to_csv(f"{prefix}_factors_chi.csv", index=False)


def select_ranks(
    panel: Panel,
    spectrum: SpectrumEstimate,
    config: RankConfig,
    eig: FrequencyEigenSystem | None = None,
) -> tuple[int, int, int]:
    """Choose (q, r, r_phi), honoring fixed overrides from the config.

    r comes from ICp2 on the sample covariance eigenvalues; q from the
    penalty scan over dynamic eigenvalues; r_phi from ICp2 applied to the
    eigenvalues of the band-restricted spectral mass, capped at r.
    """
    if config.q is not None and config.r is not None and config.r_phi is not None:
        return config.q, config.r, config.r_phi
    if eig is None:
        eig = hermitian_eig(spectrum)
    n, T = panel.n, panel.T

    if config.r is not None:
        r = config.r
    else:
        gamma0 = panel.x @ panel.x.T / T
        r = bai_ng_r(np.linalg.eigvalsh(gamma0), n, T, config.k_max)

    if config.q is not None:
        q = config.q
    else:
        q = hallin_liska_q(eig, T, spectrum.M_T, config.k_max, config.hl_penalty_grid)

    if config.r_phi is not None:
        r_phi = config.r_phi
    else:
        in_band = np.abs(eig.freqs) <= config.theta_c
        weight = _riemann_weight(eig.m)
        band_mass = np.einsum(
            "hik,hk,hjk->ij",
            eig.eigvecs[in_band],
            eig.eigvals[in_band],
            np.conj(eig.eigvecs[in_band]),
        ) * weight
        band_cov = _to_real_symmetric(band_mass, "band covariance")
        r_phi = min(bai_ng_r(np.linalg.eigvalsh(band_cov), n, T, config.k_max), r)
    return q, r, r_phi
