"""Command-line entry points: nowcast, evaluate, bootstrap, simulate, target.

Every output file starts with a comment line carrying the config hash and the
input data hashes, so reruns with identical inputs are byte-identical.
Exit codes: 0 success, 1 config error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from .bootstrap import WishartConfig, bootstrap_nowcasts, save_draws
from .config import RunConfig, apply_overrides, config_hash, file_hash, load_config
from .errors import ConfigError, DataError, NumericalError
from .evaluation import EvalData, RollingPlan, evaluate_methods, pit_calibration, prepare_eval_data
from .factor_space import RankConfig
from .panel_io import IngestConfig, Panel, QuarterlyTarget, load_fred_md, load_gdp_csv
from .pipeline import PipelineParams, estimate_window
from .simulate import DgpSpec, simulate_gdp, simulate_panel
from .target import TargetSeries, build_target

FLOAT_FMT = "%.10g"


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = apply_overrides(cfg, args.set or [])
        cfg.validate(needs_data=(cfg.mode == "fred"))
        args.func(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coincast",
        description="Monthly nowcasts of the medium-to-long-run component of GDP growth",
    )
    sub = parser.add_subparsers(required=True)
    for name, func, doc in (
        ("nowcast", cmd_nowcast, "estimate the full-sample nowcast series"),
        ("evaluate", cmd_evaluate, "rolling pseudo-real-time comparison of methods"),
        ("bootstrap", cmd_bootstrap, "density nowcast via spectral resampling"),
        ("simulate", cmd_simulate, "write a synthetic panel, GDP sample, and truth"),
        ("target", cmd_target, "write the two-sided filtered oracle target"),
    ):
        p = sub.add_parser(name, help=doc)
        p.add_argument("-c", "--config", default=None, help="YAML config file")
        p.add_argument(
            "--set", action="append", metavar="KEY.PATH=VALUE",
            help="override a config key (repeatable)",
        )
        p.set_defaults(func=func)
    return parser


def _hashes(cfg: RunConfig) -> str:
    parts = [f"config_hash={config_hash(cfg)}"]
    if cfg.mode == "fred":
        parts.append(f"panel_hash={file_hash(cfg.paths.panel_csv)}")
        parts.append(f"gdp_hash={file_hash(cfg.paths.gdp_csv)}")
    else:
        parts.append(f"sim_seed={cfg.simulate.seed}")
    return " ".join(parts)


def _write_csv(frame: pd.DataFrame, path: Path, header_line: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# {header_line}\n")
        frame.to_csv(fh, index=False, float_format=FLOAT_FMT, lineterminator="\n")


def _load_inputs(cfg: RunConfig):
    """Panel, quarterly GDP, and (simulate mode) the generating truth."""
    if cfg.mode == "fred":
        ingest = IngestConfig(
            exclude_series=tuple(cfg.ingest.exclude_series),
            start=cfg.ingest.start,
            end=cfg.ingest.end,
        )
        raw = load_fred_md(cfg.paths.panel_csv, ingest)
        levels, quarters = load_gdp_csv(cfg.paths.gdp_csv)
        return raw, levels, quarters, None, None

    spec = DgpSpec(
        n=cfg.simulate.n, T=cfg.simulate.T, q=cfg.simulate.q, r=cfg.simulate.r,
        s=cfg.simulate.s, theta_c=cfg.theta_c, idio_ar=cfg.simulate.idio_ar,
        idio_cross=cfg.simulate.idio_cross, idio_scale=cfg.simulate.idio_scale,
        seed=cfg.simulate.seed,
    )
    panel, truth = simulate_panel(spec)
    loading = np.asarray(cfg.simulate.gdp_loading, dtype=float)
    if loading.size != cfg.simulate.r:
        raise ConfigError("simulate.gdp_loading must have length simulate.r")
    gdp, gdp_truth = simulate_gdp(
        truth, loading, cfg.simulate.gdp_noise_sd,
        mu=cfg.simulate.gdp_mu, seed=cfg.simulate.seed + 1, panel=panel,
    )
    return panel, gdp, None, truth, gdp_truth


def _pipeline_params(cfg: RunConfig) -> PipelineParams:
    return PipelineParams(
        M_T=cfg.spectral.M_T,
        m=cfg.spectral.m,
        theta_c=cfg.theta_c,
        ranks=RankConfig(
            q=cfg.factors.q, r=cfg.factors.r, r_phi=cfg.factors.r_phi,
            k_max=cfg.factors.k_max, theta_c=cfg.theta_c,
            hl_penalty_grid=tuple(cfg.factors.hl_penalty_grid),
        ),
        rank_floor=cfg.factors.rank_floor,
    )


def _full_sample(cfg: RunConfig) -> tuple[Panel, QuarterlyTarget, object, object]:
    from .panel_io import build_quarterly_target, standardize

    if cfg.mode == "fred":
        raw, levels, quarters, _, _ = _load_inputs(cfg)
        panel = standardize(raw)
        gdp = build_quarterly_target(levels, quarters, panel)
        return panel, gdp, None, None
    panel, gdp, _, truth, gdp_truth = _load_inputs(cfg)
    return panel, gdp, truth, gdp_truth


def cmd_nowcast(cfg: RunConfig) -> None:
    panel, gdp, truth, gdp_truth = _full_sample(cfg)
    est = estimate_window(panel, gdp, _pipeline_params(cfg))
    out = Path(cfg.paths.output_dir)
    header = _hashes(cfg)

    frame = pd.DataFrame(
        {
            "date": panel.dates.astype(str),
            "monthly": est.nowcasts.monthly,
            "qoq": est.nowcasts.qoq,
            "yoy": est.nowcasts.yoy,
        }
    )
    if gdp_truth is not None:
        frame["truth_monthly"] = gdp_truth.m2lr_monthly
        frame["truth_qoq"] = gdp_truth.m2lr_qoq
        frame["truth_yoy"] = gdp_truth.m2lr_yoy
    _write_csv(frame, out / "nowcast.csv", header)

    meta = {
        "hashes": header,
        "ranks": {"q": est.q, "r": est.r, "r_phi": est.r_phi},
        "window": {"start": str(panel.dates[0]), "end": str(panel.dates[-1]), "T": panel.T},
        "quarterly_fit": _fit_dict(est.nowcasts.fit_q),
        "annual_fit": _fit_dict(est.nowcasts.fit_a),
    }
    (out / "nowcast.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out / 'nowcast.csv'} (q={est.q}, r={est.r}, r_phi={est.r_phi})")


def _fit_dict(fit) -> dict:
    return {
        "mu": fit.mu,
        "theta": [float(v) for v in fit.theta],
        "sigma2": fit.sigma2,
        "band": list(fit.band),
    }


def _oracle_target(cfg: RunConfig, panel: Panel, gdp: QuarterlyTarget) -> TargetSeries:
    n_months = max(panel.T, int(gdp.quarter_end_months.max()) + 1)
    return build_target(
        gdp, n_months,
        half_width=cfg.target.half_width,
        order=cfg.target.order,
        support=cfg.target.wks_support,
    )


def cmd_target(cfg: RunConfig) -> None:
    panel, gdp, truth, _ = _full_sample(cfg)
    series = _oracle_target(cfg, panel, gdp)
    out = Path(cfg.paths.output_dir)
    axis = pd.period_range(panel.dates[0], periods=series.qoq_target.size, freq="M")
    frame = pd.DataFrame(
        {
            "date": axis.astype(str),
            "qoq_target": series.qoq_target,
            "yoy_target": series.yoy_target,
        }
    )
    _write_csv(frame, out / "target.csv", _hashes(cfg))
    print(
        f"wrote {out / 'target.csv'} "
        f"(qoq valid {axis[series.valid_qoq[0]]}..{axis[series.valid_qoq[1]]})"
    )


def cmd_bootstrap(cfg: RunConfig) -> None:
    from .spectral import bartlett_spectrum, cross_covariances

    panel, gdp, truth, _ = _full_sample(cfg)
    params = _pipeline_params(cfg)
    est = estimate_window(panel, gdp, params)
    spectrum = bartlett_spectrum(cross_covariances(panel, params.M_T), params.m)
    wcfg = WishartConfig(B=cfg.bootstrap.B, dof_rule=cfg.bootstrap.dof_rule, seed=cfg.bootstrap.seed)
    ens = bootstrap_nowcasts(
        spectrum, panel, gdp, (est.q, est.r, est.r_phi), wcfg, theta_c=cfg.theta_c
    )

    out = Path(cfg.paths.output_dir)
    header = _hashes(cfg)
    for name, deciles in (("qoq", ens.deciles_qoq), ("yoy", ens.deciles_yoy)):
        cols = {"date": panel.dates.astype(str)}
        for i, dec in enumerate(range(10, 100, 10)):
            cols[f"d{dec}"] = deciles[i]
        _write_csv(pd.DataFrame(cols), out / f"deciles_{name}.csv", header)
    if cfg.bootstrap.save_draws:
        out.mkdir(parents=True, exist_ok=True)
        save_draws(ens, out / "draws.bin")
    print(f"wrote {out / 'deciles_qoq.csv'} and deciles_yoy.csv (B={ens.B}, nu={ens.nu:.2f})")


def cmd_evaluate(cfg: RunConfig) -> None:
    if cfg.mode == "fred":
        raw, levels, quarters, _, _ = _load_inputs(cfg)
        data = prepare_eval_data(raw, levels, quarters)
        panel_dates = data.dates
        gdp_full = data.full_gdp
    else:
        panel, gdp, truth, gdp_truth = _full_sample(cfg)
        data = _simulated_eval_data(cfg, panel, gdp)
        panel_dates = panel.dates
        gdp_full = gdp

    n_months = max(len(panel_dates), int(gdp_full.quarter_end_months.max()) + 1)
    target = build_target(
        gdp_full, n_months,
        half_width=cfg.target.half_width,
        order=cfg.target.order,
        support=cfg.target.wks_support,
    )

    plan = RollingPlan(
        window_length=cfg.rolling.window_length,
        test_start=cfg.rolling.test_start,
        test_end=cfg.rolling.test_end,
    )
    plan = _clamp_plan(plan, panel_dates, target)
    report, _ = evaluate_methods(
        data, plan, list(cfg.methods), target,
        params=_pipeline_params(cfg),
        n_jobs=cfg.runtime.n_jobs,
        cf_ar_override=cfg.cf_ar_override,
        half_width=cfg.target.half_width,
        wks_support=cfg.target.wks_support,
    )
    out = Path(cfg.paths.output_dir)
    header = _hashes(cfg)
    _write_csv(report.table, out / "evaluation_table.csv", header)
    if len(cfg.methods) > 1:
        _write_csv(report.dm, out / "dm_matrix.csv", header)
    if cfg.evaluation.pit_B > 0:
        _write_pit_grid(cfg, data, plan, target, out, header)
    print(report.table.to_string(index=False))
    print(f"wrote {out / 'evaluation_table.csv'}")


def _write_pit_grid(cfg: RunConfig, data, plan, target: TargetSeries, out: Path, header: str) -> None:
    from .evaluation import rolling_density_run

    wcfg = WishartConfig(
        B=cfg.evaluation.pit_B, dof_rule=cfg.bootstrap.dof_rule, seed=cfg.bootstrap.seed
    )
    ensemble = rolling_density_run(
        data, plan, _pipeline_params(cfg), wcfg, n_jobs=cfg.runtime.n_jobs
    )
    months = plan.test_months()
    anchor = data.dates[0]
    idx = np.array([(mth - anchor).n for mth in months])
    frame_cols = {}
    for horizon, tvals in (("qoq", target.qoq_target), ("yoy", target.yoy_target)):
        sliced = np.full(len(months), np.nan)
        in_range = (idx >= 0) & (idx < tvals.size)
        sliced[in_range] = tvals[idx[in_range]]
        stub = TargetSeries(sliced, sliced.copy(), (0, len(months) - 1), (0, len(months) - 1))
        res = pit_calibration(ensemble, stub, horizon="quarterly" if horizon == "qoq" else "annual")
        frame_cols[f"cdf_{horizon}"] = res.cdf
        frame_cols[f"band_lo_{horizon}"] = np.clip(res.grid - res.band, 0.0, 1.0)
        frame_cols[f"band_hi_{horizon}"] = np.clip(res.grid + res.band, 0.0, 1.0)
        grid = res.grid
    frame = pd.DataFrame({"u": grid, **frame_cols})
    _write_csv(frame, out / "pit_cdf.csv", header)


def _simulated_eval_data(cfg: RunConfig, panel: Panel, gdp: QuarterlyTarget) -> EvalData:
    """Wrap a simulated panel so the rolling harness can re-standardize windows."""
    from .panel_io import RawPanel

    raw = RawPanel(
        series_ids=panel.series_ids or [f"sim{i:03d}" for i in range(panel.n)],
        tcodes=[1] * panel.n,
        observations=(panel.x * panel.stds[:, None] + panel.means[:, None]).T,
        dates=panel.dates,
    )
    levels = None  # quarterly growth is already in gdp; reuse it directly
    return EvalData(raw, panel.dates, np.array([]), gdp.quarters, gdp)


def _clamp_plan(plan: RollingPlan, dates, target: TargetSeries) -> RollingPlan:
    first_allowed = dates[0] + (plan.window_length - 1)
    start = pd.Period(plan.test_start, "M")
    end = pd.Period(plan.test_end, "M")
    lo_t = dates[0] + int(max(target.valid_qoq[0], target.valid_yoy[0]))
    hi_t = dates[0] + int(min(target.valid_qoq[1], target.valid_yoy[1]))
    new_start = max(start, first_allowed, lo_t)
    new_end = min(end, dates[-1], hi_t)
    if new_end < new_start:
        raise DataError("no test month satisfies the window and target constraints")
    if (new_start, new_end) != (start, end):
        print(
            f"warning: test range trimmed to {new_start}..{new_end} "
            "(window length and target support)",
            file=sys.stderr,
        )
    return RollingPlan(plan.window_length, str(new_start), str(new_end))


def cmd_simulate(cfg: RunConfig) -> None:
    if cfg.mode != "simulate":
        raise ConfigError("cmd simulate requires mode: simulate")
    panel, gdp, _, truth, gdp_truth = _load_inputs(cfg)
    out = Path(cfg.paths.output_dir)
    header = _hashes(cfg)

    panel_frame = pd.DataFrame(
        panel.x.T, columns=panel.series_ids, index=panel.dates.astype(str)
    ).reset_index(names="date")
    _write_csv(panel_frame, out / "sim_panel.csv", header)

    truth_frame = pd.DataFrame(
        {
            "date": panel.dates.astype(str),
            "delta_y": gdp_truth.delta_y,
            "m2lr_monthly": gdp_truth.m2lr_monthly,
            "m2lr_qoq": gdp_truth.m2lr_qoq,
            "m2lr_yoy": gdp_truth.m2lr_yoy,
        }
    )
    _write_csv(truth_frame, out / "sim_truth.csv", header)

    gdp_frame = pd.DataFrame(
        {"quarter": gdp.quarters.astype(str), "g": gdp.g, "a": gdp.a,
         "end_month": gdp.quarter_end_months}
    )
    _write_csv(gdp_frame, out / "sim_gdp.csv", header)
    print(f"wrote sim_panel.csv, sim_gdp.csv, sim_truth.csv to {out}")


if __name__ == "__main__":
    sys.exit(main())
