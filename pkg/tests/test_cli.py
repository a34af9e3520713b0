import hashlib
import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from diffridge import RidgeFit
from diffridge.cli import main


def run(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


def file_hashes(directory):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(Path(directory).iterdir())}


class TestSimulate:
    def test_csv_shape_and_initial_column(self, tmp_path):
        out = tmp_path / "sim"
        res = run("simulate", "--model", "M1", "--N", 2, "--n", 4, "--seed", 0,
                  "--out", out)
        assert res.exit_code == 0, res.output
        lines = (out / "paths.csv").read_text().strip().split("\n")
        assert lines[0] == "x0,x1,x2,x3,x4"
        rows = [line.split(",") for line in lines[1:]]
        assert len(rows) == 2 and all(len(r) == 5 for r in rows)
        assert all(r[0] == "0.0" for r in rows)

    def test_rerun_from_manifest_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run("simulate", "--model", "M2", "--N", 3, "--n", 5, "--seed", 9,
                   "--out", a).exit_code == 0
        assert run("simulate", "--config", a / "manifest.json",
                   "--out", b).exit_code == 0
        assert file_hashes(a) == file_hashes(b)

    def test_flag_overrides_config(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run("simulate", "--model", "M1", "--N", 2, "--n", 4, "--seed", 1,
                   "--out", a).exit_code == 0
        assert run("simulate", "--config", a / "manifest.json", "--seed", 2,
                   "--out", b).exit_code == 0
        assert file_hashes(a)["paths.csv"] != file_hashes(b)["paths.csv"]

    def test_invalid_model_usage_error(self, tmp_path):
        res = run("simulate", "--model", "M9", "--out", tmp_path / "x")
        assert res.exit_code == 2

    def test_unknown_config_key_usage_error(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"bogus": 1}))
        res = run("simulate", "--config", cfg, "--out", tmp_path / "x")
        assert res.exit_code == 2


class TestSelect:
    def test_outputs(self, tmp_path):
        out = tmp_path / "sel"
        res = run("select", "--model", "M1", "--N", 20, "--n", 60, "--seed", 5,
                  "--out", out)
        assert res.exit_code == 0, res.output
        assert "chosen K" in res.output
        lines = (out / "selection.csv").read_text().strip().split("\n")
        assert lines[0] == "K,m,contrast,penalty,objective,chosen"
        assert len(lines) == 7  # grid {1,2,4,8,16,32}
        fit = RidgeFit.from_json((out / "fit.json").read_text())
        assert np.isfinite(fit.predict(0.0))

    def test_rerun_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run("select", "--model", "M3", "--N", 10, "--n", 50, "--seed", 2,
                   "--out", a).exit_code == 0
        assert run("select", "--config", a / "manifest.json",
                   "--out", b).exit_code == 0
        assert file_hashes(a) == file_hashes(b)

    def test_explicit_L_and_penalty(self, tmp_path):
        res = run("select", "--model", "M1", "--N", 10, "--n", 50, "--L", 5.0,
                  "--penalty", "multi", "--out", tmp_path / "s")
        assert res.exit_code == 0
        res_bad = run("select", "--model", "M1", "--L", "big",
                      "--out", tmp_path / "t")
        assert res_bad.exit_code == 2


class TestTable:
    def test_table5_single_rep_flags_sd(self, tmp_path):
        out = tmp_path / "t5"
        res = run("table", "--table", 5, "--reps", 1, "--seed", 3, "--out", out)
        assert res.exit_code == 0, res.output
        lines = (out / "table5.csv").read_text().strip().split("\n")
        assert lines[0] == "model,interval,estimator,N,n,mean,sd"
        body = lines[1:]
        assert len(body) == 9  # 3 models x (ridge + nw-literal + nw-corrected)
        assert all(line.endswith("(single rep)") for line in body)
        estimators = {line.split(",")[2] for line in body}
        assert estimators == {"adaptive", "nw-literal", "nw-corrected"}
        raw = (out / "table5_reps.csv").read_text().strip().split("\n")
        assert raw[0] == "model,interval,estimator,N,n,rep,mise"
        assert len(raw) == 10

    def test_invalid_table_id(self, tmp_path):
        assert run("table", "--table", 7, "--out", tmp_path / "x").exit_code == 2


class TestCalibrate:
    def test_singleton_V(self, tmp_path):
        out = tmp_path / "cal"
        res = run("calibrate", "--V", "2.5", "--models", "C1", "--reps", 1,
                  "--N", 10, "--n", 40, "--Nprime", 10, "--seed", 4, "--out", out)
        assert res.exit_code == 0, res.output
        chosen = json.loads((out / "chosen.json").read_text())
        assert chosen["kappa"] == 2.5
        lines = (out / "calibration.csv").read_text().strip().split("\n")
        assert lines[0] == "model,kappa,mean_mise"
        assert lines[1].startswith("C1,2.5,")

    def test_rerun_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        args = ["calibrate", "--V", "1,4", "--models", "C2", "--reps", 1,
                "--N", 8, "--n", 40, "--Nprime", 8, "--seed", 6]
        assert run(*args, "--out", a).exit_code == 0
        assert run("calibrate", "--config", a / "manifest.json",
                   "--out", b).exit_code == 0
        assert file_hashes(a) == file_hashes(b)


class TestBundle:
    def test_columns_and_truth(self, tmp_path):
        out = tmp_path / "bun"
        res = run("bundle", "--model", "M2", "--N", 30, "--n", 40, "--count", 2,
                  "--seed", 8, "--out", out)
        assert res.exit_code == 0, res.output
        lines = (out / "bundle.csv").read_text().strip().split("\n")
        assert lines[0] == "x,truth,est_01,est_02"
        assert len(lines) == 202  # header + 201 grid points
        mid = lines[1 + 100].split(",")  # x = 0 row
        assert float(mid[0]) == 0.0
        assert float(mid[1]) == pytest.approx(1.0)  # (1 - 0^2)^2
        import math
        cap = math.sqrt(math.log(30 * 40))
        for line in lines[1:]:
            parts = [float(v) for v in line.split(",")]
            assert all(np.isfinite(parts))
            assert parts[2] <= cap + 1e-12 and parts[3] <= cap + 1e-12

    def test_count_must_be_positive(self, tmp_path):
        assert run("bundle", "--count", 0, "--out", tmp_path / "x").exit_code == 2
