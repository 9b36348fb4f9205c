"""Oracle target construction and low-pass filter primitives.

The evaluation target interpolates quarterly growth to monthly frequency
with the sinc (band-limited sampling) kernel and then applies a truncated
ideal low-pass filter whose weights are rescaled to sum to one. The module
also provides the folding formula for systematic sampling and the spectral
factorization behind the squared-trigonometric (Butterworth-type) gain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, NumericalError
from .panel_io import QuarterlyTarget

__all__ = [
    "TargetSeries",
    "ButterworthSpec",
    "wks_interpolate",
    "bk_weights",
    "bk_lowpass",
    "build_target",
    "fold_spectrum",
    "spectral_factorize",
]

DEFAULT_CUTOFF = np.pi / 6
DEFAULT_HALF_WIDTH = 36
QUARTERLY_CUTOFF = np.pi / 2
QUARTERLY_HALF_WIDTH = 12


@dataclass
class TargetSeries:
    """Monthly oracle target aligned to the panel's monthly axis.

    Entries outside the +-half_width support are NaN; valid ranges give the
    first and last month with a defined value for each horizon.
    """

    qoq_target: np.ndarray
    yoy_target: np.ndarray
    valid_qoq: tuple[int, int]
    valid_yoy: tuple[int, int]


@dataclass
class ButterworthSpec:
    """Minimum-phase factor of |1+z|^{2s} + varsigma |1-z|^{2s} and its gain."""

    s: int
    varsigma: float
    phi_coeffs: np.ndarray  # phi(L) = sum_k phi_coeffs[k] L^k, roots outside unit circle
    theta_c: float

    def phi_magnitude_sq(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        z = np.exp(-1j * np.outer(theta, np.arange(len(self.phi_coeffs))))
        return np.abs(z @ self.phi_coeffs) ** 2

    def gain(self, theta: np.ndarray) -> np.ndarray:
        """Low-pass gain: 1 at 0, 1/2 at theta_c, 0 at pi, monotone between."""
        theta = np.asarray(theta, dtype=float)
        num = np.abs(1.0 + np.exp(-1j * theta)) ** (2 * self.s)
        return num / self.phi_magnitude_sq(theta)


def wks_interpolate(samples: np.ndarray, support: int | None = None) -> np.ndarray:
    """Reconstruct a monthly series from quarterly samples with sinc kernels.

    samples[tau] is the value at month 3*tau; the output covers months
    0..3*(Q-1). Truncation to |t - 3 tau| <= 3*support quarters is optional;
    the kernel weights are renormalized to sum to one at every month so that
    constants survive truncation. Sample months are reproduced exactly.
    """
    v = np.asarray(samples, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise DataError("interpolation needs a nonempty 1-d sample vector")
    if not np.isfinite(v).all():
        raise DataError("interpolation samples must be finite")
    if support is not None and support < 1:
        raise ConfigError("support must be at least one quarter")
    q = v.size
    months = np.arange(3 * (q - 1) + 1)
    gaps = (months[:, None] - 3.0 * np.arange(q)[None, :]) / 3.0
    kernel = np.sinc(gaps)
    if support is not None:
        kernel = np.where(np.abs(gaps) <= support, kernel, 0.0)
    sums = kernel.sum(axis=1)
    if np.any(np.abs(sums) < 1e-12):
        raise NumericalError("sinc kernel weights cancel; widen the support")
    return (kernel @ v) / sums


def bk_weights(cutoff: float = DEFAULT_CUTOFF, half_width: int = DEFAULT_HALF_WIDTH) -> np.ndarray:
    """Truncated ideal low-pass weights, additively adjusted to sum to 1.

    Returns the symmetric weight vector for lags -half_width..half_width.
    """
    if not 0.0 < cutoff < np.pi:
        raise ConfigError(f"cutoff {cutoff} must lie in (0, pi)")
    if half_width < 1:
        raise ConfigError("half_width must be at least 1")
    j = np.arange(1, half_width + 1)
    one_sided = np.sin(cutoff * j) / (np.pi * j)
    w = np.concatenate([one_sided[::-1], [cutoff / np.pi], one_sided])
    w += (1.0 - w.sum()) / w.size
    return w


def bk_lowpass(
    x: np.ndarray,
    cutoff: float = DEFAULT_CUTOFF,
    half_width: int = DEFAULT_HALF_WIDTH,
) -> np.ndarray:
    """Two-sided low-pass filter; NaN where the +-half_width support is missing.

    The filter is applied to the demeaned series and the mean is added back,
    so adding a constant to the input shifts the output by the same constant.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DataError("filter input must be 1-d")
    if not np.isfinite(x).all():
        raise DataError("filter input must be finite")
    width = 2 * half_width + 1
    if x.size < width:
        raise DataError(f"series of length {x.size} is shorter than the filter span {width}")
    w = bk_weights(cutoff, half_width)
    mean = x.mean()
    core = np.convolve(x - mean, w[::-1], mode="valid") + mean
    out = np.full(x.size, np.nan)
    out[half_width : half_width + core.size] = core
    return out


def build_target(
    gdp: QuarterlyTarget,
    n_months: int,
    cutoff: float = DEFAULT_CUTOFF,
    half_width: int = DEFAULT_HALF_WIDTH,
    order: str = "interpolate_first",
    support: int | None = None,
) -> TargetSeries:
    """Monthly medium-to-long-run target for both growth horizons.

    order selects the construction: "interpolate_first" interpolates the
    quarterly series to monthly frequency and applies the monthly low-pass
    filter; "filter_first" low-passes the quarterly series (cutoff pi/2,
    truncation 12 quarters) and interpolates the result. The two agree up to
    truncation error. Output arrays have length n_months, NaN outside the
    supported range.
    """
    if order not in ("interpolate_first", "filter_first"):
        raise ConfigError(f"unknown target order {order!r}")
    qoq, valid_q = _target_one_series(
        gdp.g, gdp.quarter_end_months, n_months, cutoff, half_width, order, support
    )
    yoy, valid_a = _target_one_series(
        gdp.a, gdp.quarter_end_months, n_months, cutoff, half_width, order, support
    )
    return TargetSeries(qoq, yoy, valid_q, valid_a)


def _target_one_series(values, end_months, n_months, cutoff, half_width, order, support):
    finite = np.isfinite(values)
    if finite.sum() < 2:
        raise DataError("need at least two observed quarters to build a target")
    vals = values[finite]
    months = end_months[finite]
    if np.any(np.diff(months) != 3):
        raise DataError("observed quarters must be consecutive")

    if order == "interpolate_first":
        monthly = wks_interpolate(vals, support)
        filtered = bk_lowpass(monthly, cutoff, half_width)
        offset = int(months[0])
    else:
        fq = bk_lowpass(vals, QUARTERLY_CUTOFF, QUARTERLY_HALF_WIDTH)
        ok = np.isfinite(fq)
        if ok.sum() < 2:
            raise DataError("too few quarters survive the quarterly filter")
        filtered = wks_interpolate(fq[ok], support)
        offset = int(months[np.where(ok)[0][0]])

    out = np.full(n_months, np.nan)
    idx = np.arange(filtered.size) + offset
    keep = (idx >= 0) & (idx < n_months) & np.isfinite(filtered)
    out[idx[keep]] = filtered[keep]
    valid = np.where(np.isfinite(out))[0]
    if valid.size == 0:
        raise DataError("target support does not overlap the monthly axis")
    return out, (int(valid[0]), int(valid[-1]))


def _dirichlet_12(x: np.ndarray) -> np.ndarray:
    """sin(6x)/sin(x/2), continuous through x = 0 mod 2pi."""
    den = np.sin(x / 2.0)
    num = np.sin(6.0 * x)
    small = np.abs(den) < 1e-9
    safe = np.where(small, 1.0, den)
    ratio = num / safe
    limit = 12.0 * np.cos(6.0 * x) / np.where(np.abs(np.cos(x / 2.0)) < 0.5, 1.0, np.cos(x / 2.0))
    return np.where(small, limit, ratio)


def _fold_kernel(x: np.ndarray, horizon: str) -> np.ndarray:
    # sin(3x/2)/sin(x/2) = 1 + 2 cos(x) removes the singular ratio
    three = 1.0 + 2.0 * np.cos(x)
    if horizon == "quarterly":
        return three**4
    if horizon == "annual":
        return three**2 * _dirichlet_12(x) ** 2
    raise ConfigError(f"unknown horizon {horizon!r}")


def fold_spectrum(sigma, horizon: str, thetas: np.ndarray | None = None):
    """Spectral density of the every-third-month sample of a filtered series.

    sigma(theta) is the monthly spectral density of the underlying growth;
    the quarterly horizon uses the (1,2,3,2,1) aggregation transfer and the
    annual horizon the (1,1,1)*(twelve ones) transfer. The folded density is
    f(theta) = (1/3) * sum_{j=0}^{2} K((theta + 2 pi j)/3) sigma((theta + 2 pi j)/3),
    so the integral over [0, 2 pi) equals the filtered-process variance.
    """
    if thetas is None:
        thetas = np.linspace(0.0, 2.0 * np.pi, 481, endpoint=False)
    thetas = np.asarray(thetas, dtype=float)
    out = np.zeros_like(thetas)
    for j in range(3):
        tj = (thetas + 2.0 * np.pi * j) / 3.0
        out += _fold_kernel(tj, horizon) * np.asarray(sigma(tj), dtype=float)
    return thetas, out / 3.0


def spectral_factorize(s: int, theta_c: float) -> ButterworthSpec:
    """Factor |1+z|^{2s} + varsigma |1-z|^{2s} into phi(z) phi(1/z).

    varsigma = ((1 + cos theta_c)/(1 - cos theta_c))^s. The factor phi has
    real coefficients and all roots strictly outside the unit circle; its
    scale is fixed by |phi(1)|^2 = 4^s.

    In terms of w = z + 1/z the target is (2+w)^s + varsigma (2-w)^s, whose
    roots solve (2+w)/(2-w) = -varsigma^(1/s) on the s-th roots of -1 and so
    are available in closed form. Each w-root yields the quadratic
    z^2 - w z + 1 with one root on each side of the unit circle, which keeps
    the factorization well conditioned for every admissible order.
    """
    if not 1 <= s <= 12:
        raise ConfigError(f"order s={s} must lie in 1..12")
    if not 0.0 < theta_c < np.pi:
        raise ConfigError(f"cutoff theta_c={theta_c} must lie in (0, pi)")
    ratio = (1.0 + np.cos(theta_c)) / (1.0 - np.cos(theta_c))  # varsigma^(1/s)
    varsigma = ratio**s

    phi = np.array([1.0 + 0.0j])
    for k in range(s):
        xi = ratio * np.exp(1j * np.pi * (2 * k + 1) / s)
        if abs(xi + 1.0) < 1e-12:
            continue  # degenerate direction: the polynomial degree drops here
        w = 2.0 * (xi - 1.0) / (xi + 1.0)
        disc = np.sqrt(w**2 - 4.0 + 0j)
        z1, z2 = (w + disc) / 2.0, (w - disc) / 2.0
        rho = z1 if abs(z1) > abs(z2) else z2
        if abs(rho) <= 1.0 + 1e-12:
            raise NumericalError("factorization found a root on the unit circle")
        phi = np.convolve(phi, np.array([1.0, -1.0 / rho]))
    if np.abs(phi.imag).max() > 1e-8 * max(1.0, np.abs(phi.real).max()):
        raise NumericalError("factor coefficients are not real; root pairing failed")
    phi = phi.real
    phi *= 2.0**s / phi.sum()  # |phi(1)| = 2^s, phi(1) = sum of coefficients

    spec = ButterworthSpec(s, varsigma, phi, theta_c)
    grid = np.linspace(0.0, np.pi, 257)
    lhs = spec.phi_magnitude_sq(grid)
    rhs = np.abs(1.0 + np.exp(-1j * grid)) ** (2 * s) + varsigma * np.abs(
        1.0 - np.exp(-1j * grid)
    ) ** (2 * s)
    err = np.abs(lhs - rhs).max() / rhs.max()
    if err > 1e-8:
        raise NumericalError(f"spectral factorization failed to converge: residual {err:.3e}")
    return spec
