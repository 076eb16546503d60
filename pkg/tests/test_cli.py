"""End-to-end CLI behavior: artifacts, determinism, config handling, exit codes."""

import json

import numpy as np
import pytest

from kmdflow.cli import (
    ConfigError,
    ExperimentConfig,
    build_inputs,
    load_config_file,
    main,
    predicted_rate,
    run_experiment,
)
from kmdflow.series import CSV_HEADER, read_series_csv


def run_cli(args):
    return main([str(a) for a in args])


BASE = ["--preset", "coulomb", "--tend", "2", "--cells", "64", "--band-limit", "16",
        "--seed", "7", "--sample-interval", "0.5"]


class TestRunExperiment:
    def test_artifacts_and_schema(self, tmp_path):
        out = tmp_path / "run"
        assert run_cli(BASE + ["--out", out]) == 0
        assert (out / "manifest.json").exists()
        assert (out / "rates.json").exists()
        series = out / "series.csv"
        assert series.read_text().splitlines()[0] == CSV_HEADER
        data = read_series_csv(series)
        assert data["mass"].max() <= 1 + 1e-10
        assert data["min_mu"].min() >= 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"] == "completed"
        assert manifest["config"]["s"] == 1.0
        rates = json.loads((out / "rates.json").read_text())
        assert rates["fits"][0]["prediction"] == 0.2

    def test_byte_determinism(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run_cli(BASE + ["--out", a])
        run_cli(BASE + ["--out", b])
        assert (a / "series.csv").read_bytes() == (b / "series.csv").read_bytes()
        assert (a / "rates.json").read_bytes() == (b / "rates.json").read_bytes()

    def test_seed_changes_series(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run_cli(BASE + ["--out", a])
        run_cli(BASE[:-4] + ["--seed", "8", "--sample-interval", "0.5", "--out", b])
        assert (a / "series.csv").read_bytes() != (b / "series.csv").read_bytes()

    def test_equilibrium_custom_run_zero_energy(self, tmp_path):
        out = tmp_path / "eq"
        code = run_cli(["--preset", "custom", "--s", "1.5", "--tend", "1", "--cells",
                        "64", "--band-limit", "16", "--mu0-equals-nu", "--out", out])
        assert code == 0
        data = read_series_csv(out / "series.csv")
        np.testing.assert_allclose(data["energy"], 0.0, atol=1e-20)

    def test_hole_preset_records_sublevel_column(self, tmp_path):
        out = tmp_path / "hole"
        code = run_cli(["--preset", "coulomb", "--gamma0", "1", "--gamma-nu", "1",
                        "--hole-width", "0.3", "--tend", "4", "--cells", "128",
                        "--band-limit", "32", "--sample-interval", "0.5",
                        "--seed", "0", "--out", out])
        assert code == 0
        data = read_series_csv(out / "series.csv")
        assert np.all(np.isfinite(data["sublevel_a"]))
        assert abs(data["sublevel_a"][0] - 0.3) <= 2.0 / 128
        assert data["sublevel_a"][-1] < data["sublevel_a"][0]

    def test_solver_abort_exit_code(self, tmp_path, monkeypatch):
        from kmdflow import cli as cli_mod
        from kmdflow.series import FlowAbort

        def explode(cfg):
            raise FlowAbort("velocity blow-up")

        monkeypatch.setattr(cli_mod, "_run_series", explode)
        out = tmp_path / "abort"
        code = run_experiment(ExperimentConfig(preset="coulomb", t_end=1.0,
                                               output_path=str(out)))
        assert code == 3
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"] == "velocity blow-up"
        assert not (out / "series.csv").exists()

    def test_relu_preset_runs(self, tmp_path):
        out = tmp_path / "relu"
        code = run_cli(["--preset", "relu", "--tend", "2", "--particles", "40",
                        "--cells", "64", "--band-limit", "16", "--mode", "wfr",
                        "--sample-interval", "0.5", "--out", out])
        assert code == 0
        data = read_series_csv(out / "series.csv")
        assert np.all(np.isnan(data["hgamma"]))  # no grid norm for particles
        assert np.all(np.diff(data["energy"]) <= 1e-12)

    def test_snapshots(self, tmp_path):
        out = tmp_path / "snap"
        code = run_cli(BASE + ["--out", out, "--snapshot-times", "0,0.5,1.5"])
        assert code == 0
        lines = (out / "snapshots.csv").read_text().splitlines()
        header = lines[0].split(",")
        assert header[0] == "x" and len(header) == 4
        # t = 0 column equals the initial density
        cfg = ExperimentConfig(preset="coulomb", t_end=2.0, n_cells=64, band_limit=16,
                               seed=7).resolve()
        mu0, _ = build_inputs(cfg)
        col0 = np.array([float(line.split(",")[1]) for line in lines[1:]])
        np.testing.assert_allclose(col0, mu0.values, atol=1e-15)


class TestConfigHandling:
    def test_key_value_file(self, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text(
            "preset=coulomb\nt_end=2  # short\nn_cells=64\nband_limit=16\nseed=7\n"
        )
        values = load_config_file(cfgfile)
        assert values == {"preset": "coulomb", "t_end": 2.0, "n_cells": 64,
                          "band_limit": 16, "seed": 7}

    def test_json_file_and_cli_override(self, tmp_path):
        cfgfile = tmp_path / "run.json"
        cfgfile.write_text(json.dumps({"preset": "coulomb", "t_end": 2.0,
                                       "n_cells": 64, "band_limit": 16, "seed": 7}))
        out = tmp_path / "o"
        assert run_cli(["--config", cfgfile, "--sample-interval", "0.5",
                        "--tend", "1", "--out", out]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["t_end"] == 1.0

    def test_unknown_key_rejected(self, tmp_path):
        cfgfile = tmp_path / "bad.cfg"
        cfgfile.write_text("nonsense=1\n")
        with pytest.raises(ConfigError):
            load_config_file(cfgfile)

    def test_config_error_exit_code(self, tmp_path):
        assert run_cli(["--preset", "coulomb", "--s", "2", "--out", tmp_path / "x"]) == 2
        assert run_cli(["--preset", "custom", "--out", tmp_path / "y"]) == 2
        assert run_cli(["--preset", "relu", "--snapshot-times", "0,1",
                        "--out", tmp_path / "z"]) == 2

    def test_preset_consistency(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(preset="coulomb", s=2.0).resolve()
        cfg = ExperimentConfig(preset="relu").resolve()
        assert cfg.s == 2.0 and cfg.gamma0 == float("inf")

    def test_predicted_rates(self):
        _, pred, _ = predicted_rate(ExperimentConfig(preset="coulomb", min_nu=0.2).resolve())
        assert pred == 0.2
        _, pred, _ = predicted_rate(
            ExperimentConfig(preset="riesz_s", s=2.0, gamma0=2.0, gamma_nu=2.0).resolve()
        )
        assert pred == 1.0  # (min(2, 0) + 2) / 2
        _, pred, _ = predicted_rate(
            ExperimentConfig(preset="relu", gamma_nu=3.0).resolve()
        )
        assert pred == 4.0  # (min(inf, 2) + 2) / 1


class TestSweep:
    def test_fan_out(self, tmp_path):
        entries = [
            {"preset": "coulomb", "t_end": 1.0, "n_cells": 64, "band_limit": 16,
             "seed": s, "sample_interval": 0.5, "output_path": str(tmp_path / f"s{s}")}
            for s in (0, 1)
        ]
        sweep = tmp_path / "sweep.json"
        sweep.write_text(json.dumps(entries))
        assert run_cli(["--sweep", sweep]) == 0
        assert (tmp_path / "s0" / "series.csv").exists()
        assert (tmp_path / "s1" / "series.csv").exists()

    def test_duplicate_outputs_rejected(self, tmp_path):
        entries = [{"preset": "coulomb", "output_path": "same"}] * 2
        sweep = tmp_path / "sweep.json"
        sweep.write_text(json.dumps(entries))
        assert run_cli(["--sweep", sweep]) == 2
