"""Lag-window spectral density estimation on a symmetric frequency grid.

Cross-covariances use the 1/T divisor at every lag; the spectral matrix is
the Bartlett (triangular window) estimate evaluated at the 2m+1 frequencies
theta_h = 2*pi*h/(2m+1), h = -m..m, which include 0 and exclude +-pi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .panel_io import Panel

__all__ = [
    "CrossCovarianceSet",
    "SpectrumEstimate",
    "FrequencyEigenSystem",
    "cross_covariances",
    "bartlett_spectrum",
    "hermitian_eig",
    "dump_spectrum",
]

HERMITIAN_TOL = 1e-8


@dataclass
class CrossCovarianceSet:
    """Sample cross-covariances Gamma_k, k = 0..M_T, each n x n."""

    gammas: np.ndarray  # (M_T + 1, n, n)
    T: int
    M_T: int


@dataclass
class SpectrumEstimate:
    """Bartlett spectral matrices over the symmetric grid."""

    freqs: np.ndarray  # (2m + 1,) radians, ordered h = -m..m
    matrices: np.ndarray  # (2m + 1, n, n) complex Hermitian
    M_T: int
    m: int

    @property
    def n(self) -> int:
        return self.matrices.shape[1]

    @property
    def zero_index(self) -> int:
        return self.m


@dataclass
class FrequencyEigenSystem:
    """Per-frequency eigendecomposition, eigenvalues descending."""

    freqs: np.ndarray
    eigvals: np.ndarray  # (2m + 1, n) real, descending
    eigvecs: np.ndarray  # (2m + 1, n, n) complex, column k is the k-th vector
    m: int

    @property
    def n(self) -> int:
        return self.eigvals.shape[1]


def frequency_grid(m: int) -> np.ndarray:
    h = np.arange(-m, m + 1)
    return 2.0 * np.pi * h / (2 * m + 1)


def cross_covariances(panel: Panel | np.ndarray, M_T: int) -> CrossCovarianceSet:
    """Gamma_k = (1/T) sum_{t=k+1}^T x_t x_{t-k}' for k = 0..M_T."""
    x = panel.x if isinstance(panel, Panel) else np.asarray(panel, dtype=float)
    n, T = x.shape
    if M_T >= T:
        raise ConfigError(f"lag window M_T={M_T} must be smaller than T={T}")
    if M_T < 0:
        raise ConfigError("M_T must be nonnegative")
    gammas = np.empty((M_T + 1, n, n))
    for k in range(M_T + 1):
        gammas[k] = x[:, k:] @ x[:, : T - k].T / T
    return CrossCovarianceSet(gammas, T, M_T)


def bartlett_spectrum(covs: CrossCovarianceSet, m: int) -> SpectrumEstimate:
    """Triangular-window spectral estimate on the 2m+1 point grid.

    Sigma(theta) = (1/2pi) sum_{k=-M}^{M} (1 - |k|/(M+1)) Gamma_k e^{-i theta k},
    with Gamma_{-k} = Gamma_k'. The result is Hermitian by construction and
    positive semidefinite because the triangular window is a Fejer kernel.
    """
    if m < 1:
        raise ConfigError("m must be at least 1")
    M = covs.M_T
    freqs = frequency_grid(m)
    weights = 1.0 - np.arange(M + 1) / (M + 1.0)
    weighted = covs.gammas * weights[:, None, None]

    out = np.empty((2 * m + 1, covs.gammas.shape[1], covs.gammas.shape[1]), dtype=complex)
    if M >= 1:
        phases = np.exp(-1j * np.outer(freqs, np.arange(1, M + 1)))
        pos = np.einsum("hk,kij->hij", phases, weighted[1:])
        out[:] = weighted[0][None] + pos + np.conj(np.transpose(pos, (0, 2, 1)))
    else:
        out[:] = weighted[0][None]
    out /= 2.0 * np.pi
    return SpectrumEstimate(freqs, out, M, m)


def hermitian_eig(spectrum: SpectrumEstimate) -> FrequencyEigenSystem:
    """Eigendecompose every grid matrix with a deterministic phase convention.

    Eigenvalues are returned in descending order; each eigenvector is rotated
    so that its largest-magnitude entry is real and positive, which makes
    repeated runs (and bootstrap draws) reproducible.
    """
    mats = spectrum.matrices
    scale = max(1.0, float(np.abs(mats).max()))
    herm_gap = np.abs(mats - np.conj(np.transpose(mats, (0, 2, 1)))).max()
    if herm_gap > HERMITIAN_TOL * scale:
        raise NumericalError(f"spectral matrix not Hermitian: |S - S^H| = {herm_gap:.3e}")

    vals, vecs = np.linalg.eigh(mats)
    vals = vals[:, ::-1]
    vecs = vecs[:, :, ::-1]
    vecs = _fix_phase(vecs)
    return FrequencyEigenSystem(spectrum.freqs, vals, vecs, spectrum.m)


def _fix_phase(vecs: np.ndarray) -> np.ndarray:
    """Rotate each eigenvector so its largest-magnitude entry is real positive."""
    mags = np.abs(vecs)
    idx = mags.argmax(axis=1)  # (H, n) pivot row per column
    pivot = np.take_along_axis(vecs, idx[:, None, :], axis=1)[:, 0, :]
    piv_mag = np.abs(pivot)
    piv_mag[piv_mag == 0.0] = 1.0
    phase = pivot / piv_mag
    return vecs * np.conj(phase)[:, None, :]


def dump_spectrum(spectrum: SpectrumEstimate, path) -> None:
    """Debug dump of the spectral matrices as a complex-pair CSV."""
    n = spectrum.n
    with open(path, "w") as fh:
        fh.write("h,theta,row,col,re,im\n")
        for h, theta in enumerate(spectrum.freqs):
            mat = spectrum.matrices[h]
            for i in range(n):
                for j in range(n):
                    fh.write(
                        f"{h - spectrum.m},{theta:.12g},{i},{j},"
                        f"{mat[i, j].real:.12g},{mat[i, j].imag:.12g}\n"
                    )
