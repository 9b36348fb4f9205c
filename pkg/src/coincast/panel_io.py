"""Monthly panel ingestion and alignment.

Reads FRED-MD style CSVs (second header row carries transform codes), applies
the standard stationarity transforms, aligns the quarterly GDP calendar with
the monthly panel, and standardizes each series to mean 0 / variance 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DataError, TransformError

__all__ = [
    "RawPanel",
    "Panel",
    "QuarterlyTarget",
    "IngestConfig",
    "apply_tcode",
    "load_fred_md",
    "load_gdp_csv",
    "standardize",
    "build_quarterly_target",
]

# Transform codes and the number of leading observations each one consumes.
# 1 level, 2 first difference, 3 second difference, 4 log, 5 dlog, 6 ddlog,
# 7 first difference of the gross rate minus one.
TCODES = {1: 0, 2: 1, 3: 2, 4: 0, 5: 1, 6: 2, 7: 2}

# FRED-MD mnemonics dropped from the panel (series not used for estimation).
DEFAULT_EXCLUDE = ("ACOGNO", "ANDENOx", "TWEXAFEGSMTHx", "UMCSENTx", "VIXCLSx")


@dataclass(frozen=True)
class IngestConfig:
    """Options controlling CSV ingestion."""

    exclude_series: tuple[str, ...] = DEFAULT_EXCLUDE
    start: str | None = None  # "YYYY-MM", inclusive
    end: str | None = None


@dataclass
class RawPanel:
    """Un-transformed monthly panel with per-series transform codes.

    observations is T_raw x n_raw with NaN for missing values; dates is a
    monthly PeriodIndex strictly increasing by one month.
    """

    series_ids: list[str]
    tcodes: list[int]
    observations: np.ndarray
    dates: pd.PeriodIndex

    def __post_init__(self) -> None:
        obs = np.asarray(self.observations, dtype=float)
        if obs.ndim != 2:
            raise DataError("observations must be a 2-d (T x n) array")
        self.observations = obs
        if len(self.tcodes) != obs.shape[1] or len(self.series_ids) != obs.shape[1]:
            raise DataError(
                f"column mismatch: {obs.shape[1]} data columns, "
                f"{len(self.tcodes)} transform codes, {len(self.series_ids)} ids"
            )
        bad = sorted(set(self.tcodes) - set(TCODES))
        if bad:
            raise DataError(f"unknown transform codes: {bad}")
        if len(self.dates) != obs.shape[0]:
            raise DataError("date index length does not match observation rows")
        steps = np.diff(self.dates.asi8)
        if len(steps) and not np.all(steps == 1):
            raise DataError("dates must increase strictly by one month")
        all_missing = np.all(np.isnan(obs), axis=0)
        if np.any(all_missing):
            names = [self.series_ids[i] for i in np.where(all_missing)[0]]
            raise DataError(f"series with no observations: {names}")


@dataclass
class Panel:
    """Standardized balanced panel; x is n x T, column t is the cross-section x_t."""

    x: np.ndarray
    dates: pd.PeriodIndex
    means: np.ndarray
    stds: np.ndarray
    series_ids: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def T(self) -> int:
        return self.x.shape[1]


@dataclass
class QuarterlyTarget:
    """Quarterly log growth aligned to the monthly panel calendar.

    g[tau] is the one-quarter log change and a[tau] the four-quarter log
    change of GDP; both carry leading NaNs where the lag is unavailable.
    quarter_end_months[tau] is the index of quarter tau's third month on the
    monthly axis that starts at the panel's first date (indices may run past
    the panel end when GDP extends further, which the target filters need).
    """

    g: np.ndarray
    a: np.ndarray
    quarter_end_months: np.ndarray
    quarters: pd.PeriodIndex


def apply_tcode(series: np.ndarray, tcode: int, name: str = "series") -> np.ndarray:
    """Apply one FRED-MD stationarity transform to a single series.

    Missing values propagate; the output has the same length as the input
    with TCODES[tcode] leading NaNs introduced by differencing.
    """
    if tcode not in TCODES:
        raise DataError(f"unknown transform code {tcode} for {name}")
    x = np.asarray(series, dtype=float).copy()

    if tcode in (4, 5, 6):
        bad = np.where(np.isfinite(x) & (x <= 0.0))[0]
        if bad.size:
            i = int(bad[0])
            raise TransformError(
                f"log transform (tcode {tcode}) requires positive values: "
                f"{name}[{i}] = {x[i]}"
            )
    if tcode == 1:
        return x
    if tcode == 2:
        return _diff(x)
    if tcode == 3:
        return _diff(_diff(x))
    if tcode == 4:
        return np.log(x)
    if tcode == 5:
        return _diff(np.log(x))
    if tcode == 6:
        return _diff(_diff(np.log(x)))
    # tcode 7: first difference of the gross rate minus one
    zero = np.where(np.isfinite(x[:-1]) & (x[:-1] == 0.0))[0]
    if zero.size:
        i = int(zero[0])
        raise TransformError(f"rate transform (tcode 7) hit zero denominator: {name}[{i}]")
    rate = np.full_like(x, np.nan)
    rate[1:] = x[1:] / x[:-1] - 1.0
    return _diff(rate)


def _diff(x: np.ndarray) -> np.ndarray:
    out = np.full_like(x, np.nan)
    out[1:] = x[1:] - x[:-1]
    return out


def load_fred_md(path, config: IngestConfig | None = None) -> RawPanel:
    """Load a FRED-MD style CSV.

    Expected layout: row 1 column headers (first column is the date), row 2
    the transform codes (first cell typically "Transform:"), remaining rows
    monthly observations. Series named in config.exclude_series are dropped
    and the date range is restricted to [config.start, config.end].
    """
    config = config or IngestConfig()
    try:
        frame = pd.read_csv(path, header=0, dtype=str, skip_blank_lines=True)
    except (OSError, pd.errors.ParserError) as exc:
        raise DataError(f"cannot read panel CSV {path}: {exc}") from exc
    if frame.shape[1] < 2 or frame.shape[0] < 2:
        raise DataError(f"panel CSV {path} has no usable data")

    first_col = frame.columns[0]
    # locate the transform-code row: the row whose first cell is not a date
    tcode_row = frame.iloc[0]
    tcode_cells = tcode_row.iloc[1:]
    if tcode_cells.isna().any():
        raise DataError(
            f"transform-code row has {tcode_cells.notna().sum()} entries for "
            f"{frame.shape[1] - 1} data columns"
        )
    try:
        tcodes_all = [int(float(v)) for v in tcode_cells]
    except ValueError as exc:
        raise DataError(f"non-numeric transform code in {path}: {exc}") from exc

    data = frame.iloc[1:].copy()
    data = data[data[first_col].notna()]
    try:
        dates = pd.PeriodIndex(pd.to_datetime(data[first_col]), freq="M")
    except (ValueError, pd.errors.OutOfBoundsDatetime) as exc:
        raise DataError(f"cannot parse dates in {path}: {exc}") from exc

    series_ids = [str(c) for c in frame.columns[1:]]
    values = data.iloc[:, 1:].apply(pd.to_numeric, errors="coerce").to_numpy(float)

    keep = [i for i, s in enumerate(series_ids) if s not in set(config.exclude_series)]
    series_ids = [series_ids[i] for i in keep]
    tcodes = [tcodes_all[i] for i in keep]
    values = values[:, keep]

    mask = np.ones(len(dates), dtype=bool)
    if config.start is not None:
        mask &= dates >= pd.Period(config.start, freq="M")
    if config.end is not None:
        mask &= dates <= pd.Period(config.end, freq="M")
    return RawPanel(series_ids, tcodes, values[mask], dates[mask])


def load_gdp_csv(path) -> tuple[np.ndarray, pd.PeriodIndex]:
    """Load quarterly GDP levels from a two-column CSV (date, level)."""
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as exc:
        raise DataError(f"cannot read GDP CSV {path}: {exc}") from exc
    if frame.shape[1] < 2:
        raise DataError(f"GDP CSV {path} needs (date, level) columns")
    try:
        quarters = pd.PeriodIndex(pd.to_datetime(frame.iloc[:, 0]), freq="Q")
    except (ValueError, pd.errors.OutOfBoundsDatetime) as exc:
        raise DataError(f"cannot parse GDP dates in {path}: {exc}") from exc
    levels = pd.to_numeric(frame.iloc[:, 1], errors="coerce").to_numpy(float)
    if np.isnan(levels).any():
        raise DataError(f"GDP CSV {path} contains non-numeric levels")
    return levels, quarters


def standardize(raw: RawPanel, window: tuple[str, str] | None = None) -> Panel:
    """Transform, window, trim leading missings, and z-score each series.

    The window bounds refer to post-transform dates. Interior missing values
    are rejected; the panel start is moved forward to the first month from
    which every retained series is observed through the window end.
    """
    n = len(raw.series_ids)
    transformed = np.empty_like(raw.observations)
    for j in range(n):
        transformed[:, j] = apply_tcode(raw.observations[:, j], raw.tcodes[j], raw.series_ids[j])

    dates = raw.dates
    mask = np.ones(len(dates), dtype=bool)
    if window is not None:
        lo, hi = pd.Period(window[0], freq="M"), pd.Period(window[1], freq="M")
        mask = (dates >= lo) & (dates <= hi)
    x = transformed[mask]
    dates = dates[mask]
    if x.shape[0] == 0:
        raise DataError("empty window after date restriction")

    # missings are legal only as a prefix of a series (late start / transform
    # lags); anything after the first observed value is an interior gap
    isnan = np.isnan(x)
    start = 0
    for j in range(x.shape[1]):
        col = isnan[:, j]
        if not col.any():
            continue
        seen_finite = np.concatenate([[False], (~col).cumsum()[:-1] > 0])
        interior = col & seen_finite
        if interior.any():
            t = int(np.where(interior)[0][0])
            raise DataError(
                f"interior missing value in {raw.series_ids[j]} at {dates[t]}"
            )
        start = max(start, int(np.where(col)[0][-1]) + 1)
    if start >= x.shape[0]:
        raise DataError("no balanced sample: every month has a missing value")
    x = x[start:].T  # n x T
    dates = dates[start:]

    means = x.mean(axis=1)
    stds = x.std(axis=1)
    zero_var = np.where(stds <= 0.0)[0]
    if zero_var.size:
        raise DataError(f"zero-variance series: {raw.series_ids[int(zero_var[0])]}")
    z = (x - means[:, None]) / stds[:, None]
    return Panel(z, dates, means, stds, list(raw.series_ids))


def build_quarterly_target(
    gdp_levels: np.ndarray,
    quarters: pd.PeriodIndex,
    panel: Panel,
) -> QuarterlyTarget:
    """Quarterly and annual log growth of GDP, aligned to the panel months.

    g[tau] = log GDP_tau - log GDP_{tau-1}; a[tau] = log GDP_tau - log
    GDP_{tau-4}. Quarters ending before the panel start are dropped after the
    growth rates are computed, so no information is lost at the boundary.
    """
    levels = np.asarray(gdp_levels, dtype=float)
    if levels.ndim != 1 or len(levels) != len(quarters):
        raise DataError("GDP levels and quarter index have mismatched lengths")
    if np.any(levels <= 0.0):
        raise DataError("GDP levels must be strictly positive")
    steps = np.diff(quarters.asi8)
    if len(steps) and not np.all(steps == 1):
        raise DataError("GDP quarters must be consecutive")

    logs = np.log(levels)
    g = np.full(len(levels), np.nan)
    a = np.full(len(levels), np.nan)
    g[1:] = logs[1:] - logs[:-1]
    a[4:] = logs[4:] - logs[:-4]

    anchor = panel.dates[0]
    end_months = np.array(
        [(q.asfreq("M", how="end") - anchor).n for q in quarters], dtype=int
    )
    keep = end_months >= 0
    if not keep.any():
        raise DataError("no GDP quarter overlaps the panel calendar")
    return QuarterlyTarget(g[keep], a[keep], end_months[keep], quarters[keep])
