"""Rolling harness, competitors, accuracy statistics, and PIT calibration."""

import numpy as np
import pandas as pd
import pytest

from conftest import make_quarterly
from coincast.bootstrap import BootstrapEnsemble
from coincast.errors import ConfigError, DataError
from coincast.evaluation import (
    EvalData,
    RollingPlan,
    diebold_mariano,
    evaluate_methods,
    msne_msre,
    pit_calibration,
    prepare_eval_data,
    rolling_run,
)
from coincast.factor_space import RankConfig
from coincast.panel_io import RawPanel
from coincast.pipeline import PipelineParams
from coincast.simulate import DgpSpec, simulate_gdp, simulate_panel
from coincast.target import TargetSeries, build_target


def _sim_eval_data(seed=21, n=25, T=480, noise=0.4, theta=(0.7, 0.4)):
    spec = DgpSpec(n=n, T=T, q=2, r=2, seed=seed)
    panel, truth = simulate_panel(spec)
    gdp, gt = simulate_gdp(truth, np.array(theta), noise_sd=noise, mu=0.002,
                           seed=seed + 1, panel=panel)
    raw = RawPanel(
        panel.series_ids, [1] * panel.n,
        (panel.x * panel.stds[:, None] + panel.means[:, None]).T, panel.dates,
    )
    data = EvalData(raw, panel.dates, np.array([]), gdp.quarters, gdp)
    return data, gdp, gt, panel


class TestRollingPlan:
    def test_reference_design_counts_468_months(self):
        plan = RollingPlan(241, "1980-01", "2018-12")
        months = plan.test_months()
        assert len(months) == 468
        assert months[0] == pd.Period("1980-01", "M")
        assert months[-1] == pd.Period("2018-12", "M")

    def test_window_floor(self):
        with pytest.raises(ConfigError):
            RollingPlan(12, "1980-01", "1990-01")


class TestRollingRun:
    def test_constant_growth_all_methods_flat(self):
        # constant quarterly growth passes through every method unchanged
        data, gdp, gt, panel = _sim_eval_data(seed=33, n=15, T=400)
        flat = np.full_like(data.full_gdp.g, 0.6)
        flat[0] = np.nan
        a_flat = np.full_like(data.full_gdp.a, 2.4)
        a_flat[:4] = np.nan
        data.full_gdp.g[:] = flat
        data.full_gdp.a[:] = a_flat
        plan = RollingPlan(241, str(panel.dates[300]), str(panel.dates[305]))
        params = PipelineParams(ranks=RankConfig(q=1, r=1, r_phi=1))
        for method in ("USCOIN", "BP", "CF", "SW"):
            res = rolling_run(data, plan, method, params=params)
            np.testing.assert_allclose(res.qoq_nowcast, 0.6, atol=1e-6, err_msg=method)
            np.testing.assert_allclose(res.yoy_nowcast, 2.4, atol=1e-6, err_msg=method)

    def test_cf_with_zero_ar_equals_bp(self):
        data, gdp, gt, panel = _sim_eval_data(seed=34, n=15, T=400)
        plan = RollingPlan(241, str(panel.dates[300]), str(panel.dates[310]))
        bp = rolling_run(data, plan, "BP")
        cf = rolling_run(data, plan, "CF", cf_ar_override=0.0)
        np.testing.assert_allclose(cf.qoq_nowcast, bp.qoq_nowcast, atol=1e-12)
        np.testing.assert_allclose(cf.yoy_nowcast, bp.yoy_nowcast, atol=1e-12)

    def test_unknown_method(self):
        data, gdp, gt, panel = _sim_eval_data(seed=35, n=10, T=320)
        plan = RollingPlan(241, str(panel.dates[260]), str(panel.dates[261]))
        with pytest.raises(ConfigError):
            rolling_run(data, plan, "ARIMA")

    def test_window_leaving_sample_rejected(self):
        data, gdp, gt, panel = _sim_eval_data(seed=36, n=10, T=300)
        plan = RollingPlan(241, str(panel.dates[100]), str(panel.dates[101]))
        with pytest.raises(DataError):
            rolling_run(data, plan, "USCOIN",
                        params=PipelineParams(ranks=RankConfig(q=1, r=1, r_phi=1)))


class TestMsneMsre:
    def test_perfect_nowcast(self, rng):
        target = rng.standard_normal(100)
        rel_msne, rel_msre = msne_msre(target, target.copy(), target)
        assert rel_msne == 0.0

    def test_constant_mean_nowcast_scores_one(self, rng):
        target = rng.standard_normal(500)
        nowcast = np.full(500, target.mean())
        rel_msne, _ = msne_msre(nowcast, nowcast, target)
        np.testing.assert_allclose(rel_msne, 1.0, atol=1e-12)

    def test_never_revised_nowcast_has_zero_msre(self, rng):
        target = rng.standard_normal(50)
        nowcast = rng.standard_normal(50)
        revision = nowcast.copy()  # the month t-1 value never changes
        revision[1:] = nowcast[:-1]
        _, rel_msre = msne_msre(nowcast, revision, target)
        assert rel_msre == 0.0

    def test_shift_invariance(self, rng):
        target = rng.standard_normal(80)
        nowcast = target + 0.3 * rng.standard_normal(80)
        revision = rng.standard_normal(80)
        a = msne_msre(nowcast, revision, target)
        b = msne_msre(nowcast + 5.0, revision + 5.0, target + 5.0)
        np.testing.assert_allclose(a[0], b[0], atol=1e-10)

    def test_nan_targets_are_ignored(self, rng):
        target = rng.standard_normal(60)
        target[:10] = np.nan
        nowcast = rng.standard_normal(60)
        rel_msne, _ = msne_msre(nowcast, nowcast, target)
        assert np.isfinite(rel_msne)


class TestDieboldMariano:
    def test_identical_losses_degenerate(self, rng):
        e = rng.standard_normal(100) ** 2
        stat, p = diebold_mariano(e, e.copy())
        assert np.isnan(stat) and p == 1.0

    def test_size_under_the_null(self, rng):
        # iid mean-zero differentials: |stat| < 1.96 about 95% of the time
        hits = 0
        reps = 200
        for _ in range(reps):
            d = rng.standard_normal(10_000)
            e2 = rng.standard_normal(10_000) ** 2
            stat, _ = diebold_mariano(e2 + d, e2)
            hits += abs(stat) < 1.96
        assert hits / reps > 0.9

    def test_power_with_shifted_mean(self, rng):
        # analytic oracle: mean 0.1, sd 1, T = 10000 gives stat near 10
        d = 0.1 + rng.standard_normal(10_000)
        base = rng.standard_normal(10_000) ** 2
        stat, p = diebold_mariano(base + d, base)
        assert 7.0 < stat < 13.0
        assert p < 1e-8

    def test_requires_thirty_observations(self, rng):
        with pytest.raises(DataError):
            diebold_mariano(rng.standard_normal(10), rng.standard_normal(10))


def _ensemble_from_draws(qdraws):
    B, T = qdraws.shape
    deciles = np.percentile(qdraws, np.arange(10, 100, 10), axis=0)
    return BootstrapEnsemble(qdraws, qdraws.copy(), deciles, deciles.copy(), 0, 1.0)


def _target_stub(values):
    v = np.asarray(values, dtype=float)
    return TargetSeries(v, v.copy(), (0, v.size - 1), (0, v.size - 1))


class TestPitCalibration:
    def test_self_consistent_ensemble_uniform(self, rng):
        B, T = 199, 400
        draws = rng.standard_normal((B, T))
        target = rng.standard_normal(T)
        res = pit_calibration(_ensemble_from_draws(draws), _target_stub(target))
        assert res.ks_stat < res.band

    def test_degenerate_ensemble_pits_at_half(self, rng):
        target = rng.standard_normal(50)
        draws = np.tile(target, (10, 1))
        res = pit_calibration(_ensemble_from_draws(draws), _target_stub(target))
        np.testing.assert_allclose(res.pits, 0.5)
        # the empirical CDF is a step at one half
        assert res.cdf[res.grid < 0.5].max() == 0.0
        assert res.cdf[res.grid >= 0.5].min() == 1.0

    def test_systematic_overprediction_violates_band(self, rng):
        B, T = 199, 400
        target = rng.standard_normal(T)
        draws = rng.standard_normal((B, T)) + 1.0  # ensemble shifted up
        res = pit_calibration(_ensemble_from_draws(draws), _target_stub(target))
        assert res.ks_stat > res.band
        # PITs pile up near zero: CDF above the diagonal
        mid = res.grid.size // 2
        assert res.cdf[mid] > res.grid[mid]

    def test_empty_overlap_rejected(self, rng):
        draws = rng.standard_normal((10, 5))
        target = _target_stub(np.full(5, np.nan))
        with pytest.raises(DataError):
            pit_calibration(_ensemble_from_draws(draws), target)


class TestEvaluateMethods:
    def test_full_report_on_simulated_data(self):
        data, gdp, gt, panel = _sim_eval_data(seed=21)
        target = build_target(gdp, panel.T)
        plan = RollingPlan(241, str(panel.dates[310]), str(panel.dates[355]))
        params = PipelineParams(ranks=RankConfig(q=2, r=2, r_phi=2))
        report, results = evaluate_methods(
            data, plan, ["USCOIN", "BP", "CF", "SW"], target, params=params, n_jobs=4
        )
        assert len(report.table) == 8  # 4 methods x 2 horizons
        assert set(report.table.horizon) == {"qoq", "yoy"}
        assert report.table.rel_msne.min() > 0.0
        uscoin_q = report.table.query("method == 'USCOIN' and horizon == 'qoq'").rel_msne.iloc[0]
        assert uscoin_q < 1.0  # beats the constant-mean nowcast
        assert len(report.dm) == 2 * 6  # all pairs, both horizons

    def test_method_agnostic_target(self):
        # the harness never touches the target: byte-identical across methods
        data, gdp, gt, panel = _sim_eval_data(seed=22, n=12, T=400)
        t1 = build_target(gdp, panel.T)
        t2 = build_target(gdp, panel.T)
        np.testing.assert_array_equal(
            np.nan_to_num(t1.qoq_target), np.nan_to_num(t2.qoq_target)
        )

    def test_single_method_no_dm(self):
        data, gdp, gt, panel = _sim_eval_data(seed=23, n=12, T=400)
        target = build_target(gdp, panel.T)
        plan = RollingPlan(241, str(panel.dates[300]), str(panel.dates[303]))
        report, _ = evaluate_methods(
            data, plan, ["BP"], target,
        )
        assert len(report.table) == 2
        assert report.dm.empty

    def test_needs_a_method(self):
        data, gdp, gt, panel = _sim_eval_data(seed=24, n=12, T=400)
        target = build_target(gdp, panel.T)
        plan = RollingPlan(241, str(panel.dates[300]), str(panel.dates[301]))
        with pytest.raises(ConfigError):
            evaluate_methods(data, plan, [], target)
