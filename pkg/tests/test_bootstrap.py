"""Real embedding, Wishart sampling, and the resampled nowcast ensemble."""

import numpy as np
import pytest

from coincast.bootstrap import (
    BootstrapEnsemble,
    WishartConfig,
    bootstrap_nowcasts,
    real_embed,
    reconstruct_complex,
    wishart_draw,
)
from coincast.errors import ConfigError
from coincast.factor_space import RankConfig
from coincast.pipeline import PipelineParams, estimate_window
from coincast.simulate import DgpSpec, simulate_gdp, simulate_panel
from coincast.spectral import bartlett_spectrum, cross_covariances


class TestRealEmbed:
    def test_real_input_gives_block_diagonal(self):
        m = np.array([[2.0, 0.5], [0.5, 1.0]], dtype=complex)
        e = real_embed(m)
        np.testing.assert_array_equal(e[:2, :2], m.real)
        np.testing.assert_array_equal(e[2:, 2:], m.real)
        np.testing.assert_array_equal(e[:2, 2:], 0.0)

    def test_hand_eigenvalues(self):
        m = np.array([[2.0, 1j], [-1j, 2.0]])
        e = real_embed(m)
        assert e.shape == (4, 4)
        np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(e)), [1.0, 1.0, 3.0, 3.0], atol=1e-12)
        np.testing.assert_array_equal(e, e.T)

    def test_psd_preserved_with_doubled_multiplicity(self, rng):
        a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        m = a @ np.conj(a.T)
        e = real_embed(m)
        herm = np.sort(np.linalg.eigvalsh(m))
        np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(e)), np.repeat(herm, 2), atol=1e-9)


class TestReconstructComplex:
    def test_round_trip_exact(self, rng):
        a = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        m = a @ np.conj(a.T)
        m = 0.5 * (m + np.conj(m.T))  # exactly Hermitian bit pattern
        np.testing.assert_array_equal(reconstruct_complex(real_embed(m)), m)

    def test_asymmetric_blocks_symmetrized(self, rng):
        d = rng.standard_normal((6, 6))
        d = d + d.T  # symmetric but blocks unequal
        out = reconstruct_complex(d)
        np.testing.assert_allclose(out, np.conj(out.T), atol=1e-14)

    def test_psd_preserved_over_draws(self, rng):
        a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        scale = real_embed(a @ np.conj(a.T) + 3.0 * np.eye(3))
        worst = 0.0
        for _ in range(1000):
            w = wishart_draw(scale, 12.0, rng)
            worst = min(worst, np.linalg.eigvalsh(reconstruct_complex(w))[0])
        assert worst > -1e-8


class TestWishartDraw:
    def test_mean_matches_scale(self, rng):
        a = rng.standard_normal((8, 8))
        scale = a @ a.T + 8.0 * np.eye(8)
        acc = np.zeros_like(scale)
        for _ in range(10_000):
            acc += wishart_draw(scale, 50.0, rng)
        acc /= 10_000
        rel = np.linalg.norm(acc - scale) / np.linalg.norm(scale)
        assert rel < 0.03

    def test_concentration_rate_in_dof(self, rng):
        a = rng.standard_normal((6, 6))
        scale = a @ a.T + 6.0 * np.eye(6)
        devs = {}
        for nu in (50, 200, 800):
            sq = 0.0
            for _ in range(400):
                sq += np.linalg.norm(wishart_draw(scale, float(nu), rng) - scale) ** 2
            devs[nu] = np.sqrt(sq / 400)
        np.testing.assert_allclose(devs[50] / devs[200], 2.0, rtol=0.25)
        np.testing.assert_allclose(devs[200] / devs[800], 2.0, rtol=0.25)

    def test_scalar_case_is_scaled_chi_square(self, rng):
        draws = np.array([wishart_draw(np.eye(1), 40.0, rng)[0, 0] for _ in range(4000)])
        np.testing.assert_allclose(draws.mean(), 1.0, atol=0.02)
        np.testing.assert_allclose(draws.var(), 2.0 / 40.0, rtol=0.15)

    def test_singular_rank_path(self, rng):
        # nu below the dimension: the draw has rank nu and the right mean
        scale = np.eye(10)
        draws = [wishart_draw(scale, 4.0, rng) for _ in range(2000)]
        ranks = {np.linalg.matrix_rank(d, tol=1e-10) for d in draws[:20]}
        assert ranks == {4}
        mean = np.mean(draws, axis=0)
        assert np.linalg.norm(mean - scale) / np.linalg.norm(scale) < 0.1

    def test_invalid_dof(self, rng):
        with pytest.raises(ConfigError):
            wishart_draw(np.eye(2), 0.0, rng)


def _small_setup(seed=7, n=20, T=320):
    spec = DgpSpec(n=n, T=T, q=2, r=2, seed=seed)
    panel, truth = simulate_panel(spec)
    gdp, _ = simulate_gdp(truth, np.array([0.6, 0.3]), noise_sd=0.3, mu=0.002,
                          seed=seed + 1, panel=panel)
    params = PipelineParams(M_T=20, m=75, ranks=RankConfig(q=2, r=2, r_phi=2))
    est = estimate_window(panel, gdp, params)
    spectrum = bartlett_spectrum(cross_covariances(panel, 20), 75)
    return panel, gdp, est, spectrum


class TestBootstrapNowcasts:
    def test_infinite_dof_collapses_to_point(self):
        panel, gdp, est, spectrum = _small_setup()
        ens = bootstrap_nowcasts(
            spectrum, panel, gdp, (2, 2, 2),
            WishartConfig(B=4, seed=5, nu_override=1e9),
        )
        ok = np.isfinite(est.nowcasts.qoq)
        dev = np.abs(ens.qoq_draws[:, ok] - est.nowcasts.qoq[ok][None, :]).max()
        assert dev < 1e-3
        # the annual path carries four times the quarterly aggregation gain
        ok_a = np.isfinite(est.nowcasts.yoy)
        dev_a = np.abs(ens.yoy_draws[:, ok_a] - est.nowcasts.yoy[ok_a][None, :]).max()
        assert dev_a < 4e-3

    def test_single_draw_degenerate_fan(self):
        panel, gdp, est, spectrum = _small_setup()
        ens = bootstrap_nowcasts(spectrum, panel, gdp, (2, 2, 2), WishartConfig(B=1, seed=3))
        ok = np.isfinite(ens.qoq_draws[0])
        for row in ens.deciles_qoq:
            np.testing.assert_array_equal(row[ok], ens.qoq_draws[0][ok])

    def test_seed_determinism_bit_exact(self):
        panel, gdp, est, spectrum = _small_setup()
        cfg = WishartConfig(B=25, seed=11)
        e1 = bootstrap_nowcasts(spectrum, panel, gdp, (2, 2, 2), cfg)
        e2 = bootstrap_nowcasts(spectrum, panel, gdp, (2, 2, 2), cfg)
        np.testing.assert_array_equal(e1.qoq_draws, e2.qoq_draws)
        np.testing.assert_array_equal(e1.yoy_draws, e2.yoy_draws)

    def test_decile_monotonicity(self):
        panel, gdp, est, spectrum = _small_setup(seed=23)
        ens = bootstrap_nowcasts(spectrum, panel, gdp, (2, 2, 2), WishartConfig(B=60, seed=2))
        ok = np.isfinite(ens.deciles_qoq).all(axis=0)
        assert ok.any()
        assert np.all(np.diff(ens.deciles_qoq[:, ok], axis=0) >= -1e-12)

    def test_median_tracks_point_nowcast(self):
        panel, gdp, est, spectrum = _small_setup(seed=29)
        ens = bootstrap_nowcasts(spectrum, panel, gdp, (2, 2, 2), WishartConfig(B=120, seed=4))
        ok = np.isfinite(ens.deciles_qoq).all(axis=0) & np.isfinite(est.nowcasts.qoq)
        med = ens.deciles_qoq[4, ok]
        spread = ens.deciles_qoq[8, ok] - ens.deciles_qoq[0, ok]
        frac = np.mean(np.abs(med - est.nowcasts.qoq[ok]) < 0.5 * spread)
        assert frac > 0.9

    def test_dof_rules(self):
        cfg_a = WishartConfig(B=1, dof_rule="T_over_M")
        cfg_b = WishartConfig(B=1, dof_rule="T_star")
        assert cfg_a.dof(400, 20) == 20.0
        np.testing.assert_allclose(cfg_b.dof(400, 20), 400 / (20 * np.log(20)))
        with pytest.raises(ConfigError):
            WishartConfig(B=1, dof_rule="bogus")

    def test_wider_bands_with_fewer_dof(self):
        panel, gdp, est, spectrum = _small_setup(seed=37)
        narrow = bootstrap_nowcasts(spectrum, panel, gdp, (2, 2, 2),
                                    WishartConfig(B=60, seed=9, dof_rule="T_over_M"))
        wide = bootstrap_nowcasts(spectrum, panel, gdp, (2, 2, 2),
                                  WishartConfig(B=60, seed=9, dof_rule="T_star"))
        ok = np.isfinite(narrow.deciles_qoq).all(axis=0)
        spread_n = (narrow.deciles_qoq[8] - narrow.deciles_qoq[0])[ok].mean()
        spread_w = (wide.deciles_qoq[8] - wide.deciles_qoq[0])[ok].mean()
        assert spread_w > spread_n

    def test_calibration_smoke_against_known_component(self):
        # the decile band reflects factor-estimation uncertainty only, so its
        # coverage of the true smooth component is loosely around nominal
        spec = DgpSpec(n=40, T=400, q=4, r=4, r_smooth=2, seed=77,
                       idio_ar=0.4, idio_cross=0.4, idio_scale=0.8)
        panel, truth = simulate_panel(spec)
        theta = np.array([0.7, 0.4])
        gdp, gt = simulate_gdp(truth, theta, noise_sd=0.2, mu=0.002, seed=78, panel=panel)
        params = PipelineParams(M_T=20, m=75, ranks=RankConfig(q=4, r=4, r_phi=2))
        spectrum = bartlett_spectrum(cross_covariances(panel, 20), 75)
        ens = bootstrap_nowcasts(spectrum, panel, gdp, (4, 4, 2), WishartConfig(B=150, seed=79))
        ok = np.isfinite(ens.deciles_qoq).all(axis=0) & np.isfinite(gt.m2lr_qoq)
        covered = (
            (gt.m2lr_qoq[ok] >= ens.deciles_qoq[0, ok])
            & (gt.m2lr_qoq[ok] <= ens.deciles_qoq[8, ok])
        ).mean()
        assert 0.6 <= covered <= 0.95

    def test_pit_evaluator_tie_convention(self):
        draws = np.tile(np.array([[1.0], [1.0], [1.0], [1.0]]), (1, 1))
        ens = BootstrapEnsemble(draws, draws, np.zeros((9, 1)), np.zeros((9, 1)), 0, 1.0)
        np.testing.assert_allclose(ens.pit("quarterly", np.array([1.0])), [0.5])
        np.testing.assert_allclose(ens.pit("quarterly", np.array([2.0])), [1.0])
        np.testing.assert_allclose(ens.pit("quarterly", np.array([0.0])), [0.0])
