import json
import math
import os
from pathlib import Path

import numpy as np
import pytest

from hawkes.cli import (ConfigError, OutputDir, build_model, emit_plot_data,
                        load_config, main, model_hash, resolve_out_dir,
                        run_config)
from hawkes.model import AffineActivation, ExponentialKernel, TabulatedKernel


def write_config(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg, indent=1), encoding="utf-8")
    return str(p)


BASE = {
    "experiment": "simulate",
    "seed": 42,
    "model": {"kernel": {"type": "exponential", "scale": 1.0},
              "activation": {"type": "affine", "nu": 2.0, "beta": 0.0}},
    "params": {"n_events": 200},
}


class TestConfigValidation:
    def test_valid_config_loads(self, tmp_path):
        cfg = load_config(write_config(tmp_path, BASE))
        assert cfg["experiment"] == "simulate"

    def test_unknown_key_rejected_with_line(self, tmp_path):
        bad = dict(BASE)
        bad["typo_key"] = 1
        path = write_config(tmp_path, bad)
        with pytest.raises(ConfigError) as err:
            load_config(path)
        msg = str(err.value)
        assert ".json:" in msg  # line-anchored

    def test_bad_json_reports_line(self, tmp_path):
        p = tmp_path / "broken.json"
        p.write_text('{\n "experiment": "simulate",\n }\n')
        with pytest.raises(ConfigError) as err:
            load_config(str(p))
        assert ":3:" in str(err.value) or ":2:" in str(err.value)

    def test_missing_seed_rejected(self, tmp_path):
        bad = {k: v for k, v in BASE.items() if k != "seed"}
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, bad))

    def test_build_model_variants(self):
        m = build_model(BASE["model"])
        assert isinstance(m.kernel, ExponentialKernel)
        assert isinstance(m.activation, AffineActivation)
        m2 = build_model({"kernel": {"type": "tabulated", "t": [0, 1], "h": [1, 0]},
                          "activation": {"type": "tabulated", "x": [0, 1],
                                          "y": [1, 2], "slope": 0.1}})
        assert isinstance(m2.kernel, TabulatedKernel)

    def test_model_hash_is_stable_and_order_free(self):
        a = {"kernel": {"type": "exponential", "scale": 1.0},
             "activation": {"type": "affine", "nu": 2.0, "beta": 0.0}}
        b = {"activation": {"beta": 0.0, "nu": 2.0, "type": "affine"},
             "kernel": {"scale": 1.0, "type": "exponential"}}
        assert model_hash(a) == model_hash(b)


class TestRun:
    def test_simulate_writes_artifacts(self, tmp_path):
        code = run_config(dict(BASE), tmp_path / "out")
        assert code == 0
        out = tmp_path / "out"
        assert (out / "path_r0.csv").exists()
        assert (out / "report.json").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["model_hash"] == model_hash(BASE["model"])
        # every listed file hash matches its content
        import hashlib
        for name, digest in manifest["files"].items():
            assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest

    def test_path_csv_layout(self, tmp_path):
        run_config(dict(BASE), tmp_path / "out")
        lines = (tmp_path / "out" / "path_r0.csv").read_text().splitlines()
        assert lines[0].startswith("# model=")
        assert lines[1] == "n,T_n,X_n,E_n"
        assert len(lines) == 2 + 200
        first = lines[2].split(",")
        assert first[0] == "1"
        assert float(first[1]) == float(first[2])  # T_1 == X_1

    def test_replica_streams_differ(self, tmp_path):
        cfg = dict(BASE)
        cfg["replicas"] = 2
        run_config(cfg, tmp_path / "out")
        a = (tmp_path / "out" / "path_r0.csv").read_bytes()
        b = (tmp_path / "out" / "path_r1.csv").read_bytes()
        assert a != b

    def test_transient_report_has_ks_field(self, tmp_path):
        cfg = {
            "experiment": "transient-scaling", "seed": 3,
            "model": {"kernel": {"type": "exponential", "scale": 1.0},
                      "activation": {"type": "polynomial", "nu": 1.0,
                                      "beta": 1.0, "gamma": 2.0}},
            "params": {"n_events": 1000},
        }
        run_config(cfg, tmp_path / "out")
        rep = json.loads((tmp_path / "out" / "report_r0.json").read_text())
        assert "ks_p" in rep
        series = (tmp_path / "out" / "series_r0.csv").read_text().splitlines()
        assert series[1] == "n,Z_n,ratio,rescaled_gap"

    def test_couple_experiment(self, tmp_path):
        cfg = {
            "experiment": "couple", "seed": 5,
            "model": {"kernel": {"type": "exponential", "scale": 1.0},
                      "activation": {"type": "affine", "nu": 1.0, "beta": 0.5}},
            "params": {"state": [2.0], "mc_trials": 50},
        }
        run_config(cfg, tmp_path / "out")
        rep = json.loads((tmp_path / "out" / "report.json").read_text())
        assert 0.0 <= rep["replicas"][0]["empirical_rate"] <= 1.0

    def test_stationary_linear_experiment(self, tmp_path):
        cfg = {
            "experiment": "stationary-linear", "seed": 7,
            "model": {"kernel": {"type": "exponential", "scale": 1.0},
                      "activation": {"type": "affine", "nu": 1.0, "beta": 0.5}},
            "params": {"n_samples": 60, "K": 2},
        }
        run_config(cfg, tmp_path / "out")
        rep = json.loads((tmp_path / "out" / "report.json").read_text())
        assert rep["stationary_mean_identity"] == pytest.approx(0.5)
        assert (tmp_path / "out" / "samples_r0.csv").exists()

    def test_cesaro_experiment(self, tmp_path):
        cfg = {
            "experiment": "cesaro", "seed": 9,
            "model": {"kernel": {"type": "exponential", "scale": 1.0},
                      "activation": {"type": "affine", "nu": 1.0, "beta": 0.5}},
            "params": {"n_max": 800, "K": 2, "checkpoints": [200, 400, 800]},
        }
        run_config(cfg, tmp_path / "out")
        dist = (tmp_path / "out" / "distances_r0.csv").read_text().splitlines()
        assert dist[1] == "n,W1"
        assert len(dist) == 2 + 2  # two successive-distance rows

    def test_expmem_stationary_experiment(self, tmp_path):
        cfg = {
            "experiment": "expmem-stationary", "seed": 11, "replicas": 2,
            "model": {"kernel": {"type": "exponential", "scale": 1.0},
                      "activation": {"type": "affine", "nu": 1.0, "beta": 0.5}},
            "params": {"n_burn": 200, "n_keep": 2000},
        }
        run_config(cfg, tmp_path / "out")
        rep = json.loads((tmp_path / "out" / "report.json").read_text())
        assert rep["seed_stability_ks_p"] > 0.01


class TestMainEntry:
    def test_run_exit_codes(self, tmp_path):
        cfg_path = write_config(tmp_path, BASE)
        assert main(["run", cfg_path, "--out", str(tmp_path / "o1")]) == 0
        bad = dict(BASE)
        bad["experiment"] = "nope"
        assert main(["run", write_config(tmp_path, bad, "bad.json"),
                     "--out", str(tmp_path / "o2")]) == 1

    def test_flag_overrides(self, tmp_path):
        cfg_path = write_config(tmp_path, BASE)
        main(["run", cfg_path, "--out", str(tmp_path / "oa"), "--seed", "7"])
        main(["run", cfg_path, "--out", str(tmp_path / "ob"), "--seed", "8"])
        a = (tmp_path / "oa" / "path_r0.csv").read_bytes()
        b = (tmp_path / "ob" / "path_r0.csv").read_bytes()
        assert a != b

    def test_env_var_out_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("HAWKES_OUT", str(tmp_path / "envout"))
        assert resolve_out_dir({"out_dir": "ignored"}, None) == tmp_path / "envout"
        monkeypatch.delenv("HAWKES_OUT")
        assert resolve_out_dir({"out_dir": "cfgdir"}, None) == Path("cfgdir")
        assert resolve_out_dir({}, "flagdir") == Path("flagdir")


class TestEmitPlotData:
    def test_basic_series(self, tmp_path):
        p = tmp_path / "s.csv"
        emit_plot_data([(1, 2.0), (2, 3.5)], p, "demo series")
        lines = p.read_text().splitlines()
        assert lines[0] == "# demo series"
        assert lines[1] == "x,y"
        assert lines[2].startswith("1")
