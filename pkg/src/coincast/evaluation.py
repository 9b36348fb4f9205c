"""Pseudo-real-time rolling evaluation against the two-sided oracle target.

Each rolling window re-standardizes the panel, re-estimates the nowcaster,
and records the window-end nowcast plus the re-estimated value for the
previous month (the revision input). Competitors: BP extends quarterly
growth by its sample mean, CF by chained AR(1) forecasts, SW runs the same
factor pipeline on standard principal components.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.stats import norm

from .bootstrap import BootstrapEnsemble
from .errors import ConfigError, DataError
from .panel_io import Panel, QuarterlyTarget, RawPanel, build_quarterly_target, standardize
from .pipeline import PipelineParams, estimate_window
from .target import DEFAULT_CUTOFF, DEFAULT_HALF_WIDTH, TargetSeries, bk_lowpass, wks_interpolate

__all__ = [
    "RollingPlan",
    "EvalData",
    "RollingResult",
    "EvalReport",
    "PitResult",
    "prepare_eval_data",
    "rolling_run",
    "rolling_density_run",
    "msne_msre",
    "diebold_mariano",
    "pit_calibration",
    "evaluate_methods",
]

METHODS = ("USCOIN", "BP", "CF", "SW")
EXTENSION_QUARTERS = 13  # covers the +36 month filter support past any window end


@dataclass(frozen=True)
class RollingPlan:
    """Rolling design: fixed-length windows stepped one month at a time."""

    window_length: int = 241
    test_start: str = "1980-01"
    test_end: str = "2018-12"

    def __post_init__(self) -> None:
        if self.window_length < 24:
            raise ConfigError("window_length must cover at least two years")
        if pd.Period(self.test_start, "M") > pd.Period(self.test_end, "M"):
            raise ConfigError("test_start is after test_end")

    def test_months(self) -> pd.PeriodIndex:
        return pd.period_range(self.test_start, self.test_end, freq="M")


@dataclass
class EvalData:
    """Inputs shared by every window of a rolling run."""

    raw: RawPanel
    dates: pd.PeriodIndex  # balanced post-transform monthly axis
    gdp_levels: np.ndarray
    gdp_quarters: pd.PeriodIndex
    full_gdp: QuarterlyTarget  # aligned to dates[0]


@dataclass
class RollingResult:
    """Nowcast and revision paths over the test months, per horizon."""

    months: pd.PeriodIndex
    qoq_nowcast: np.ndarray
    qoq_revision: np.ndarray
    yoy_nowcast: np.ndarray
    yoy_revision: np.ndarray
    ranks: list[tuple[int, int, int]]


@dataclass
class PitResult:
    """Probability integral transforms and their empirical CDF with a KS band."""

    pits: np.ndarray
    grid: np.ndarray
    cdf: np.ndarray
    band: float
    ks_stat: float

    @property
    def inside_band(self) -> bool:
        return bool(self.ks_stat <= self.band)


@dataclass
class EvalReport:
    """Relative accuracy table plus pairwise equal-accuracy tests."""

    table: pd.DataFrame  # columns: horizon, method, rel_msne, rel_msre
    dm: pd.DataFrame  # columns: horizon, method_a, method_b, stat, p_value


def prepare_eval_data(
    raw: RawPanel, gdp_levels: np.ndarray, gdp_quarters: pd.PeriodIndex
) -> EvalData:
    full_panel = standardize(raw)
    full_gdp = build_quarterly_target(gdp_levels, gdp_quarters, full_panel)
    return EvalData(raw, full_panel.dates, np.asarray(gdp_levels, float), gdp_quarters, full_gdp)


def _window_panel(data: EvalData, end: pd.Period, window_length: int) -> Panel:
    start = end - (window_length - 1)
    if start < data.dates[0] or end > data.dates[-1]:
        raise DataError(
            f"window {start}..{end} leaves the balanced sample {data.dates[0]}..{data.dates[-1]}"
        )
    return standardize(data.raw, (str(start), str(end)))


def _window_gdp(data: EvalData, panel: Panel) -> QuarterlyTarget:
    """Quarters observed by the window end, re-indexed to window coordinates.

    Growth rates do not depend on the window, so slicing the full-sample
    target is equivalent to rebuilding it from levels for each window.
    """
    anchor = data.dates[0]
    start_idx = (panel.dates[0] - anchor).n
    end_idx = (panel.dates[-1] - anchor).n
    months = data.full_gdp.quarter_end_months
    keep = (months >= start_idx) & (months <= end_idx)
    if keep.sum() < 8:
        raise DataError("fewer than eight GDP quarters are observed in the window")
    return QuarterlyTarget(
        data.full_gdp.g[keep],
        data.full_gdp.a[keep],
        months[keep] - start_idx,
        data.full_gdp.quarters[keep],
    )


def _factor_window(data, end, plan, params, use_pca):
    panel = _window_panel(data, end, plan.window_length)
    gdp = _window_gdp(data, panel)
    est = estimate_window(panel, gdp, params, use_pca_factors=use_pca)
    t = panel.T - 1
    return (
        est.nowcasts.qoq[t],
        est.nowcasts.qoq[t - 1],
        est.nowcasts.yoy[t],
        est.nowcasts.yoy[t - 1],
        (est.q, est.r, est.r_phi),
    )


def _ar1_fit(g: np.ndarray, override: float | None) -> tuple[float, float]:
    """Least-squares AR(1) with intercept; moment-matched intercept under override."""
    if override is not None:
        rho = float(override)
        return (1.0 - rho) * float(g.mean()), rho
    y, xlag = g[1:], g[:-1]
    var = float(((xlag - xlag.mean()) ** 2).mean())
    if var < 1e-14:
        return float(g.mean()), 0.0
    rho = float(((xlag - xlag.mean()) * (y - y.mean())).mean() / var)
    rho = float(np.clip(rho, -0.999, 0.999))
    return float(y.mean() - rho * xlag.mean()), rho


def _filter_window(data, end, plan, method, cf_ar_override, cutoff, half_width, support):
    """BP and CF: extend, interpolate, low-pass; values at the window end."""
    window_start = end - (plan.window_length - 1)
    anchor = data.dates[0]
    end_idx_global = (end - anchor).n

    out = []
    for horizon in ("quarterly", "annual"):
        series = data.full_gdp.g if horizon == "quarterly" else data.full_gdp.a
        months = data.full_gdp.quarter_end_months
        keep = np.isfinite(series) & (months <= end_idx_global) & (
            months >= (window_start - anchor).n
        )
        vals = series[keep]
        pos = months[keep] - (window_start - anchor).n  # window coordinates
        if vals.size < 8:
            raise DataError(f"too few observed quarters for {method} in window ending {end}")

        if method == "BP":
            ext_vals = np.full(EXTENSION_QUARTERS, vals.mean())
        else:
            c, rho = _ar1_fit(vals, cf_ar_override)
            ext_vals = np.empty(EXTENSION_QUARTERS)
            prev = vals[-1]
            for h in range(EXTENSION_QUARTERS):
                prev = c + rho * prev
                ext_vals[h] = prev
        extended = np.concatenate([vals, ext_vals])

        monthly = wks_interpolate(extended, support)
        filtered = bk_lowpass(monthly, cutoff, half_width)
        t_now = plan.window_length - 1 - int(pos[0])
        if t_now - 1 < 0 or t_now >= filtered.size or not np.isfinite(filtered[t_now]):
            raise DataError(f"filtered path does not reach the window end for {method}")
        out.extend([float(filtered[t_now]), float(filtered[t_now - 1])])
    return out[0], out[1], out[2], out[3], (0, 0, 0)


def rolling_run(
    data: EvalData,
    plan: RollingPlan,
    method: str,
    params: PipelineParams | None = None,
    cf_ar_override: float | None = None,
    cutoff: float = DEFAULT_CUTOFF,
    half_width: int = DEFAULT_HALF_WIDTH,
    wks_support: int | None = None,
    n_jobs: int = 1,
) -> RollingResult:
    """Run one method over every window of the plan."""
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")
    params = params or PipelineParams()
    months = plan.test_months()

    def one(end: pd.Period):
        if method in ("USCOIN", "SW"):
            return _factor_window(data, end, plan, params, use_pca=(method == "SW"))
        return _filter_window(
            data, end, plan, method, cf_ar_override, cutoff, half_width, wks_support
        )

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            rows = list(pool.map(one, months))
    else:
        rows = [one(end) for end in months]

    qn = np.array([r[0] for r in rows])
    qr = np.array([r[1] for r in rows])
    an = np.array([r[2] for r in rows])
    ar = np.array([r[3] for r in rows])
    ranks = [r[4] for r in rows]
    return RollingResult(months, qn, qr, an, ar, ranks)


def msne_msre(
    nowcast: np.ndarray, revision: np.ndarray, target: np.ndarray
) -> tuple[float, float]:
    """Relative mean-square nowcast and revision errors.

    Both statistics are normalized by the target variance over the test
    months where the target is defined. The revision at test month i
    compares the month i-1 value re-estimated at i with the one estimated
    at i-1.
    """
    nowcast = np.asarray(nowcast, float)
    revision = np.asarray(revision, float)
    target = np.asarray(target, float)
    ok = np.isfinite(target) & np.isfinite(nowcast)
    if not ok.any():
        raise DataError("nowcast and target never overlap")
    denom = float(((target[ok] - target[ok].mean()) ** 2).mean())
    if denom <= 0.0:
        raise DataError("target variance is zero over the evaluation sample")
    rel_msne = float(((nowcast[ok] - target[ok]) ** 2).mean()) / denom

    rev_ok = np.isfinite(revision[1:]) & np.isfinite(nowcast[:-1])
    if not rev_ok.any():
        raise DataError("no consecutive window pair for the revision error")
    rel_msre = float(((revision[1:][rev_ok] - nowcast[:-1][rev_ok]) ** 2).mean()) / denom
    return rel_msne, rel_msre


def diebold_mariano(
    e1: np.ndarray, e2: np.ndarray, hac_lags: int | None = None
) -> tuple[float, float]:
    """Equal-accuracy test on two loss series.

    Returns (statistic, two-sided normal p-value). The long-run variance of
    the loss differential uses a triangular-kernel HAC estimate with
    ceil(T^(1/3)) lags by default. A degenerate differential (zero variance)
    yields (nan, 1.0) rather than a rejection.
    """
    e1 = np.asarray(e1, float)
    e2 = np.asarray(e2, float)
    if e1.shape != e2.shape or e1.ndim != 1:
        raise DataError("loss series must be 1-d and equally long")
    ok = np.isfinite(e1) & np.isfinite(e2)
    d = e1[ok] - e2[ok]
    T = d.size
    if T < 30:
        raise DataError(f"need at least 30 common observations, got {T}")
    d_c = d - d.mean()
    if float((d_c**2).mean()) < 1e-300:
        return float("nan"), 1.0
    L = hac_lags if hac_lags is not None else int(np.ceil(T ** (1.0 / 3.0)))
    gamma0 = float((d_c**2).mean())
    v = gamma0
    for k in range(1, min(L, T - 1) + 1):
        gk = float((d_c[k:] * d_c[:-k]).mean())
        v += 2.0 * (1.0 - k / (L + 1.0)) * gk
    if v <= 0.0:
        v = gamma0
    stat = float(d.mean() / np.sqrt(v / T))
    return stat, float(2.0 * norm.sf(abs(stat)))


def pit_calibration(
    ensemble: BootstrapEnsemble,
    target: TargetSeries,
    horizon: str = "quarterly",
    grid_size: int = 100,
) -> PitResult:
    """PITs of the target under the ensemble's empirical predictive CDF.

    The uniformity band is the 95% Kolmogorov-Smirnov band 1.36/sqrt(T)
    around the diagonal, a documented simplification of bands that account
    for estimated parameters.
    """
    if ensemble.B < 1:
        raise DataError("empty ensemble")
    tvals = target.qoq_target if horizon == "quarterly" else target.yoy_target
    draws = ensemble.qoq_draws if horizon == "quarterly" else ensemble.yoy_draws
    if draws.shape[1] != tvals.size:
        raise DataError("ensemble and target are not aligned")
    ok = np.isfinite(tvals) & np.isfinite(draws).all(axis=0)
    if not ok.any():
        raise DataError("no date with both a target value and finite draws")
    pits = ensemble.pit(horizon, np.where(ok, tvals, 0.0))[ok]
    grid = np.linspace(0.0, 1.0, grid_size)
    cdf = (pits[:, None] <= grid[None, :]).mean(axis=0)
    band = 1.36 / np.sqrt(pits.size)
    ks = float(np.abs(cdf - grid).max())
    return PitResult(pits, grid, cdf, band, ks)


def rolling_density_run(
    data: EvalData,
    plan: RollingPlan,
    params: PipelineParams,
    wcfg,
    n_jobs: int = 1,
) -> BootstrapEnsemble:
    """Real-time density nowcasts: per-window bootstrap draws of the
    window-end value, stacked over the test months.

    Each window re-selects ranks, re-estimates the factor pipeline, and
    resamples the spectral estimate with a window-specific child seed.
    """
    from .bootstrap import BootstrapEnsemble as _Ens
    from .bootstrap import WishartConfig, bootstrap_nowcasts

    months = plan.test_months()

    def one(item):
        i, end = item
        panel = _window_panel(data, end, plan.window_length)
        gdp = _window_gdp(data, panel)
        est = estimate_window(panel, gdp, params)
        cfg_i = WishartConfig(
            B=wcfg.B, dof_rule=wcfg.dof_rule, seed=wcfg.seed + i,
            nu_override=wcfg.nu_override,
        )
        ens = bootstrap_nowcasts(
            est.spectrum, panel, gdp, (est.q, est.r, est.r_phi), cfg_i,
            theta_c=params.theta_c,
        )
        return ens.qoq_draws[:, -1], ens.yoy_draws[:, -1], ens.nu

    items = list(enumerate(months))
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            rows = list(pool.map(one, items))
    else:
        rows = [one(item) for item in items]
    qoq = np.column_stack([r[0] for r in rows])
    yoy = np.column_stack([r[1] for r in rows])
    deciles = np.arange(10, 100, 10)
    return _Ens(
        qoq, yoy,
        np.percentile(qoq, deciles, axis=0), np.percentile(yoy, deciles, axis=0),
        wcfg.seed, rows[-1][2],
    )


def evaluate_methods(
    data: EvalData,
    plan: RollingPlan,
    methods: list[str],
    target: TargetSeries,
    params: PipelineParams | None = None,
    n_jobs: int = 1,
    **filter_kwargs,
) -> tuple[EvalReport, dict[str, RollingResult]]:
    """Rolling runs for every method plus the relative accuracy table."""
    if not methods:
        raise ConfigError("need at least one method to evaluate")
    months = plan.test_months()
    anchor = data.dates[0]
    idx = np.array([(mth - anchor).n for mth in months])

    results: dict[str, RollingResult] = {}
    rows = []
    losses: dict[tuple[str, str], np.ndarray] = {}
    for horizon_name, tvals_full in (("qoq", target.qoq_target), ("yoy", target.yoy_target)):
        # months outside the target axis simply carry NaN targets
        in_range = (idx >= 0) & (idx < tvals_full.size)
        tv = np.full(len(months), np.nan)
        tv[in_range] = tvals_full[idx[in_range]]
        losses[("target", horizon_name)] = tv

    for method in methods:
        res = rolling_run(data, plan, method, params=params, n_jobs=n_jobs, **filter_kwargs)
        results[method] = res
        for horizon_name, nc, rev in (
            ("qoq", res.qoq_nowcast, res.qoq_revision),
            ("yoy", res.yoy_nowcast, res.yoy_revision),
        ):
            tv = losses[("target", horizon_name)]
            rel_msne, rel_msre = msne_msre(nc, rev, tv)
            rows.append(
                {"horizon": horizon_name, "method": method,
                 "rel_msne": rel_msne, "rel_msre": rel_msre}
            )
            losses[(method, horizon_name)] = (nc - tv) ** 2

    dm_rows = []
    for horizon_name in ("qoq", "yoy"):
        for i, m1 in enumerate(methods):
            for m2 in methods[i + 1 :]:
                l1 = losses[(m1, horizon_name)]
                l2 = losses[(m2, horizon_name)]
                if (np.isfinite(l1) & np.isfinite(l2)).sum() >= 30:
                    stat, p = diebold_mariano(l1, l2)
                else:  # too short a test sample for the asymptotic test
                    stat, p = float("nan"), float("nan")
                dm_rows.append(
                    {"horizon": horizon_name, "method_a": m1, "method_b": m2,
                     "stat": stat, "p_value": p}
                )
    table = pd.DataFrame(rows, columns=["horizon", "method", "rel_msne", "rel_msre"])
    dm = pd.DataFrame(dm_rows, columns=["horizon", "method_a", "method_b", "stat", "p_value"])
    return EvalReport(table, dm), results
