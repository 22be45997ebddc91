"""End-to-end CLI contracts: commands, file outputs, and exit codes."""

import csv
import json
import os

import numpy as np
import pytest

from qttagg.cli import main


def write(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh)
    return str(path)


@pytest.fixture
def binomial_model_file(tmp_path):
    return write(tmp_path / "model.json", {
        "weights": [1 / 3, 1 / 3, 1 / 3],
        "components": [{"type": "bernoulli", "p": 0.5}] * 3,
    })


@pytest.fixture
def wpb8_model_file(tmp_path):
    rng = np.random.default_rng(np.random.SeedSequence((3, 8)))
    w = rng.uniform(0, 1, 8)
    w /= w.sum()
    p = rng.beta(2, 10, 8)
    return write(tmp_path / "wpb8.json", {
        "weights": list(w),
        "components": [{"type": "bernoulli", "p": float(pi)} for pi in p],
    })


class TestValidate:
    def test_valid_model(self, binomial_model_file, capsys):
        assert main(["validate", binomial_model_file]) == 0
        assert "3 components" in capsys.readouterr().out

    def test_bad_probs_names_component(self, tmp_path, capsys):
        path = write(tmp_path / "bad.json", {
            "weights": [1.0],
            "components": [{"type": "categorical", "values": [0, 1],
                            "probs": [0.5, 0.6]}],
        })
        assert main(["validate", path]) == 2
        assert "component 0" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["validate", str(tmp_path / "nope.json")]) == 2


class TestRun:
    def test_dense_run_outputs(self, binomial_model_file, tmp_path):
        out = tmp_path / "out"
        config = write(tmp_path / "run.json", {
            "model": binomial_model_file, "method": "dense", "n": 8,
            "L": 1.0, "alpha": [0.9], "density": True, "output": str(out),
        })
        assert main(["run", config]) == 0
        with open(out / "cdf.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2**8
        assert set(rows[0]) == {"x", "F"}
        assert os.path.exists(out / "density.csv")
        with open(out / "risk.json") as fh:
            risk = json.load(fh)
        assert risk[0]["alpha"] == 0.9
        with open(out / "diagnostics.json") as fh:
            assert json.load(fh)["method"] == "dense"

    def test_qtt_run_matches_dense_run(self, binomial_model_file, tmp_path):
        outs = {}
        for method in ("dense", "qtt"):
            out = tmp_path / method
            config = write(tmp_path / f"{method}.json", {
                "model": binomial_model_file, "method": method, "n": 8,
                "L": 1.0, "eps": 1e-9, "output": str(out),
            })
            assert main(["run", config]) == 0
            with open(out / "cdf.csv", newline="") as fh:
                outs[method] = np.array([float(r["F"]) for r in csv.DictReader(fh)])
        assert np.max(np.abs(outs["dense"] - outs["qtt"])) < 1e-6

    def test_bond_cap_exit_code_and_step(self, wpb8_model_file, tmp_path):
        out = tmp_path / "capped"
        config = write(tmp_path / "capped.json", {
            "model": wpb8_model_file, "method": "qtt", "n": 16, "L": 1.0,
            "eps": 1e-8, "bond_cap": 4, "output": str(out),
        })
        assert main(["run", config]) == 3
        with open(out / "diagnostics.json") as fh:
            diag = json.load(fh)
        assert diag["status"] == "ResourceLimitError"
        assert diag["step"] is not None

    def test_malformed_model_exit_two(self, tmp_path):
        model = write(tmp_path / "bad.json", {
            "weights": [1.0],
            "components": [{"type": "categorical", "values": [0, 1],
                            "probs": [0.7, 0.4]}],
        })
        config = write(tmp_path / "cfg.json", {
            "model": model, "method": "dense", "n": 6,
            "output": str(tmp_path / "o")})
        assert main(["run", config]) == 2

    def test_mc_and_rc_methods(self, binomial_model_file, tmp_path):
        for method in ("mc", "rc"):
            out = tmp_path / method
            config = write(tmp_path / f"{method}.json", {
                "model": binomial_model_file, "method": method, "n": 7,
                "L": 1.0, "S": 2000, "seed": 5, "alpha": [0.95],
                "output": str(out),
            })
            assert main(["run", config]) == 0
            assert os.path.exists(out / "cdf.csv")

    def test_plot_flag_renders_figures(self, binomial_model_file, tmp_path):
        out = tmp_path / "plots"
        config = write(tmp_path / "plot.json", {
            "model": binomial_model_file, "method": "dense", "n": 7,
            "L": 1.0, "density": True, "output": str(out),
        })
        assert main(["run", config, "--plot"]) == 0
        assert os.path.exists(out / "cdf.png")
        assert os.path.exists(out / "density.png")


class TestBench:
    def test_small_sweep_schema(self, tmp_path):
        out = tmp_path / "bench"
        config = write(tmp_path / "sweep.json", {
            "generator": {"kind": "wpb", "D": 4, "seed": 1},
            "methods": ["dense", "qtt"],
            "n": [7, 8], "eps": [1e-8], "filters": ["exp"],
            "instances": 2, "reference": "rc", "output": str(out),
        })
        assert main(["bench", config]) == 0
        from qttagg.bench import BENCH_COLUMNS, SCHEMA_VERSION
        with open(out / "bench.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2 * 2 * 2
        for row in rows:
            assert list(row) == BENCH_COLUMNS
            assert int(row["schema_version"]) == SCHEMA_VERSION
            assert row["status"] == "ok"
            assert float(row["l1"]) > 0

    def test_partial_failure_recorded_per_row(self, tmp_path):
        out = tmp_path / "bench2"
        config = write(tmp_path / "sweep2.json", {
            "generator": {"kind": "wpb", "D": 6, "seed": 2},
            "methods": ["dense"],
            "n": [30, 8],           # n=30 exceeds the dense cap
            "filters": ["exp"], "output": str(out),
        })
        assert main(["bench", config]) == 0
        with open(out / "bench.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        statuses = {(r["method"], r["n"]): r["status"] for r in rows}
        assert statuses[("dense", "30")] == "ResourceLimitError"
        assert statuses[("dense", "8")] == "ok"

    def test_empty_sweep_is_validation_error(self, tmp_path):
        config = write(tmp_path / "empty.json", {
            "generator": {"kind": "wpb", "D": 3, "seed": 1},
            "methods": [], "output": str(tmp_path / "o")})
        assert main(["bench", config]) == 2

    def test_deterministic_given_seed(self, tmp_path):
        rows = []
        for rep in range(2):
            out = tmp_path / f"det{rep}"
            config = write(tmp_path / f"det{rep}.json", {
                "generator": {"kind": "wpb", "D": 4, "seed": 9},
                "methods": ["dense", "mc"], "n": [8],
                "samples": [5000], "filters": ["exp"], "output": str(out),
            })
            assert main(["bench", config]) == 0
            with open(out / "bench.csv", newline="") as fh:
                rows.append([{k: v for k, v in r.items() if k != "wall_time_s"}
                             for r in csv.DictReader(fh)])
        assert rows[0] == rows[1]


class TestRiskCommand:
    def test_risk_outputs(self, binomial_model_file, tmp_path, capsys):
        out = tmp_path / "risk"
        config = write(tmp_path / "risk.json", {
            "model": binomial_model_file, "method": "qtt", "n": 10,
            "L": 1.0625, "alpha": [0.5, 0.99], "output": str(out),
        })
        assert main(["risk", config]) == 0
        with open(out / "risk.json") as fh:
            reports = json.load(fh)
        assert len(reports) == 2
        assert reports[0]["representation"] == "qtt"
        assert reports[1]["es"] >= reports[1]["var"] - 1e-6
