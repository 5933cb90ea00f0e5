import json
import subprocess
import sys

import pytest
import yaml

from pbdlsp.cli import CSV_VERSION, main, read_curve_csv
from pbdlsp.config import ConfigError, spec_from_dict

BERNOULLI = {"model": {"family": "bernoulli", "atoms": [0.2, 0.7], "probs": [0.3, 0.3]},
             "grid": {"n": [11, 22, 44], "samples": 60, "n_boot": 10}}


def write(tmp_path, cfg, name="c.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return str(path)


class TestConfig:
    def test_defaults(self):
        spec, out = spec_from_dict({"model": BERNOULLI["model"]})
        assert spec.n_grid == [4, 8, 16, 32, 64, 128, 256] and spec.samples_per_n == 500
        assert out == {}

    @pytest.mark.parametrize("cfg", [
        {"model": BERNOULLI["model"], "grids": {}},
        {"model": BERNOULLI["model"], "grid": {"samples_per_n": 60}},
        {"model": BERNOULLI["model"], "output": {"prefx": "x"}},
        {"model": BERNOULLI["model"], "seed": {"seed": 1, "salt": 2}},
        {"model": {**BERNOULLI["model"], "prob": 0.1}},
        {"grid": {}},
        {"model": BERNOULLI["model"], "grid": {"samples": 10}},
    ])
    def test_hard_errors(self, cfg):
        with pytest.raises(ConfigError):
            spec_from_dict(cfg)

    def test_example_configs_load(self):
        from pathlib import Path

        from pbdlsp.config import load_config

        for path in sorted((Path(__file__).parents[1] / "configs").glob("*.yaml")):
            load_config(path)


class TestExitCodes:
    def test_params(self, tmp_path, capsys):
        assert main(["params", "--config", write(tmp_path, BERNOULLI), "--n", "11"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["params"][0]["a"] == pytest.approx(11.55, abs=1e-12)

    def test_usage_b_ge_1(self, capsys):
        assert main(["validate-pbd", "1", "1.0", "0"]) == 2
        assert "b must be < 1" in capsys.readouterr().err

    def test_usage_bad_args(self):
        with pytest.raises(SystemExit) as e:
            main(["lsp-curve"])
        assert e.value.code == 2

    def test_usage_unknown_key(self, tmp_path):
        assert main(["params", "--config", write(tmp_path, {**BERNOULLI, "extra": 1})]) == 2

    def test_out_of_scope(self, tmp_path):
        cfg = {"model": {"family": "bernoulli", "atoms": [0.2, 0.7], "probs": [0.9, 0.9]}}
        assert main(["params", "--config", write(tmp_path, cfg), "--n", "5"]) == 3
        assert main(["lsp-curve", "--config", write(tmp_path, {**cfg, "grid": {"n": [4, 8]}})]) == 3

    def test_poisson_boundary(self, tmp_path, capsys):
        cfg = {"model": {"family": "compound_poisson", "rates": [1.0]}, "grid": {"n": [4]}}
        assert main(["params", "--config", write(tmp_path, cfg)]) == 0
        row = json.loads(capsys.readouterr().out)["params"][0]
        assert row["case"] == "case1" and row["b"] == 0 and row["beta"] == 0

    def test_validate_pass_and_fail(self, capsys):
        assert main(["validate-pbd", "2", "0", "0"]) == 0
        assert main(["validate-pbd", "1", "0.5", "0"]) == 0
        assert main(["validate-pbd", "2", "0", "0", "--tv-threshold", "1e-6"]) == 4

    def test_slope_band_failure(self, tmp_path):
        args = ["lsp-curve", "--config", write(tmp_path, BERNOULLI), "--slope-band", "5", "6"]
        assert main(args) == 4

    def test_counterexample(self, capsys):
        assert main(["counterexample", "--samples", "20000", "--n-boot", "5"]) == 0

    def test_console_script(self):
        res = subprocess.run([sys.executable, "-m", "pbdlsp.cli", "validate-pbd", "1", "2", "0"],
                             capture_output=True, text=True)
        assert res.returncode == 2 and "b must be < 1" in res.stderr


class TestOutputs:
    def test_curve_files_byte_identical(self, tmp_path):
        cfg = {**BERNOULLI, "output": {"timing": False, "svg": True}}
        path = write(tmp_path, cfg)
        blobs = []
        for run in ("a", "b"):
            prefix = str(tmp_path / run)
            assert main(["lsp-curve", "--config", path, "--out", prefix, "--seed", "5"]) == 0
            blobs.append([(tmp_path / f"{run}{ext}").read_bytes() for ext in (".csv", ".json", ".svg")])
        assert blobs[0] == blobs[1]
        first = blobs[0][0].decode().splitlines()
        assert first[0] == f"# {CSV_VERSION}"
        assert first[1] == "n,a,b,beta,used_nu,distance,ci_low,ci_high,seconds"
        rows = read_curve_csv(tmp_path / "a.csv")
        mirror = json.loads(blobs[0][1])
        assert [float(r["distance"]) for r in rows] == [r["distance"] for r in mirror["rows"]]
        assert set(rows[0]) == set(mirror["rows"][0])

    def test_seed_changes_output(self, tmp_path):
        path = write(tmp_path, {**BERNOULLI, "output": {"timing": False}})
        main(["lsp-curve", "--config", path, "--out", str(tmp_path / "a"), "--seed", "1"])
        main(["lsp-curve", "--config", path, "--out", str(tmp_path / "b"), "--seed", "2"])
        assert (tmp_path / "a.csv").read_bytes() != (tmp_path / "b.csv").read_bytes()

    def test_simulate_and_distance(self, tmp_path, capsys):
        path = write(tmp_path, BERNOULLI)
        assert main(["simulate", "--config", path, "--n", "3", "--samples", "4", "--out", str(tmp_path / "s")]) == 0
        rep = json.loads((tmp_path / "s_samples.json").read_text())
        assert len(rep["sizes"]) == 4 and rep["law"] == "superposition"
        assert main(["simulate", "--config", path, "--n", "30", "--samples", "4", "--pbd"]) == 0
        capsys.readouterr()
        assert main(["distance", "--config", path, "--n", "11", "--out", str(tmp_path / "d")]) == 0
        rep = json.loads((tmp_path / "d_distance.json").read_text())
        assert rep["ci_low"] <= rep["ci_high"] and rep["a"] == pytest.approx(11.55)

    def test_validate_pmf_export(self, tmp_path):
        assert main(["validate-pbd", "2", "0", "0", "--pmf-out", str(tmp_path / "p.txt"),
                     "--out", str(tmp_path / "v")]) == 0
        assert json.loads((tmp_path / "v_validate.json").read_text())["passed"]
        assert (tmp_path / "p.txt").exists()
