"""End-to-end command-line runs, config handling, and output determinism."""

import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from coincast.cli import main
from coincast.config import RunConfig, apply_overrides, config_hash, load_config
from coincast.errors import ConfigError

SIM_CONFIG = {
    "mode": "simulate",
    "simulate": {
        "n": 20,
        "T": 360,
        "seed": 5,
        "gdp_loading": [0.6, 0.3],
        "gdp_noise_sd": 0.4,
    },
    "factors": {"q": 2, "r": 2, "r_phi": 2},
    "bootstrap": {"B": 10, "seed": 9},
}


def _write_config(tmp_path, extra=None, **kwargs):
    cfg = json.loads(json.dumps(SIM_CONFIG))
    cfg.update(extra or {})
    cfg.setdefault("paths", {})["output_dir"] = str(tmp_path / "out")
    for key, val in kwargs.items():
        cfg[key] = val
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


class TestConfig:
    def test_defaults_and_overrides(self):
        cfg = RunConfig()
        apply_overrides(cfg, ["spectral.M_T=24", "mode=simulate", "methods=[USCOIN]"])
        assert cfg.spectral.M_T == 24
        assert cfg.mode == "simulate"
        assert cfg.methods == ["USCOIN"]

    def test_unknown_override_path(self):
        with pytest.raises(ConfigError):
            apply_overrides(RunConfig(), ["nope.key=1"])

    def test_unknown_config_key(self, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text("bogus_section: {a: 1}\n")
        with pytest.raises(ConfigError):
            load_config(p)

    def test_hash_changes_with_content(self):
        a = RunConfig()
        b = RunConfig()
        b.spectral.m = 80
        assert config_hash(a) != config_hash(b)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.yaml")


class TestCliCommands:
    def test_nowcast_simulate_mode_with_truth_columns(self, tmp_path):
        cfg = _write_config(tmp_path)
        assert main(["nowcast", "-c", str(cfg)]) == 0
        out = tmp_path / "out" / "nowcast.csv"
        header = out.read_text().splitlines()
        assert header[0].startswith("# config_hash=")
        assert "truth_qoq" in header[1]
        meta = json.loads((tmp_path / "out" / "nowcast.json").read_text())
        assert meta["ranks"] == {"q": 2, "r": 2, "r_phi": 2}

    def test_missing_gdp_path_fails_before_compute(self, tmp_path):
        cfg = _write_config(tmp_path, mode="fred")
        assert main(["nowcast", "-c", str(cfg)]) == 1

    def test_bootstrap_outputs_deterministic(self, tmp_path):
        cfg = _write_config(tmp_path)
        assert main(["bootstrap", "-c", str(cfg)]) == 0
        first = (tmp_path / "out" / "deciles_qoq.csv").read_bytes()
        assert main(["bootstrap", "-c", str(cfg)]) == 0
        second = (tmp_path / "out" / "deciles_qoq.csv").read_bytes()
        assert first == second

    def test_decile_columns_monotone(self, tmp_path):
        cfg = _write_config(tmp_path)
        assert main(["bootstrap", "-c", str(cfg)]) == 0
        import pandas as pd

        frame = pd.read_csv(tmp_path / "out" / "deciles_qoq.csv", comment="#")
        cols = [f"d{d}" for d in range(10, 100, 10)]
        vals = frame[cols].to_numpy(float)
        ok = np.isfinite(vals).all(axis=1)
        assert (np.diff(vals[ok], axis=1) >= -1e-12).all()

    def test_evaluate_trims_range_and_writes_table(self, tmp_path, capsys):
        extra = {
            "rolling": {"window_length": 241, "test_start": "1959-01", "test_end": "2050-12"},
            "methods": ["USCOIN", "BP"],
            "runtime": {"n_jobs": 2},
        }
        cfg = _write_config(tmp_path, extra=extra)
        assert main(["evaluate", "-c", str(cfg)]) == 0
        table = (tmp_path / "out" / "evaluation_table.csv").read_text().splitlines()
        assert table[1] == "horizon,method,rel_msne,rel_msre"
        assert len(table) == 2 + 4  # header lines + 2 methods x 2 horizons
        err = capsys.readouterr().err
        assert "trimmed" in err

    def test_target_command(self, tmp_path):
        cfg = _write_config(tmp_path)
        assert main(["target", "-c", str(cfg)]) == 0
        lines = (tmp_path / "out" / "target.csv").read_text().splitlines()
        assert lines[1] == "date,qoq_target,yoy_target"

    def test_simulate_command_writes_panel_gdp_truth(self, tmp_path):
        cfg = _write_config(tmp_path)
        assert main(["simulate", "-c", str(cfg)]) == 0
        for name in ("sim_panel.csv", "sim_gdp.csv", "sim_truth.csv"):
            assert (tmp_path / "out" / name).exists()

    def test_set_overrides_reach_the_run(self, tmp_path):
        cfg = _write_config(tmp_path)
        assert main(["nowcast", "-c", str(cfg), "--set", "simulate.T=420"]) == 0
        import pandas as pd

        frame = pd.read_csv(tmp_path / "out" / "nowcast.csv", comment="#")
        assert len(frame) == 420

    def test_invalid_method_is_config_error(self, tmp_path):
        cfg = _write_config(tmp_path, extra={"methods": ["XGBOOST"]})
        assert main(["evaluate", "-c", str(cfg)]) == 1
