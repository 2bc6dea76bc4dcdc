import json

import numpy as np
import pandas as pd
import pytest
import yaml

from main import main

SMALL = {
    "simulation": {"n": 30, "d": 3, "p": 5},
    "method": {"r": 2, "compare": ["classical"]},
    "spline": {"m": 10},
    "predictor": {"name": "spline"},
    "cv": {"k": 3},
    "grid": {"gammas": [1.0], "lambda1s": [0.5], "ratios": [1.0]},
    "verification": {"sweep_gammas": [0.0, 1.0]},
}


def run(*argv, override=None):
    args = list(argv)
    args += ["--override", json.dumps({**SMALL, **(override or {})})]
    return main(args)


def _files(directory):
    return {p.relative_to(directory): p.read_bytes() for p in sorted(directory.rglob("*")) if p.is_file()}


def test_simulate_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert run("simulate", "--scenario", "1", "--replicates", "2", "--seed", "7", "--out", str(tmp_path / name)) == 0
    first, second = _files(tmp_path / "a"), _files(tmp_path / "b")
    assert first == second
    assert {str(p) for p in first} >= {"manifest.yaml", "replicate_001/data.csv", "replicate_002/truth_pcs.csv"}
    manifest = yaml.safe_load((tmp_path / "a" / "manifest.yaml").read_text())
    assert manifest["seed"] == 7 and len(manifest["config_hash"]) == 64


def test_fit_then_predict(tmp_path):
    assert run("fit", "--out", str(tmp_path / "model")) == 0
    assert (tmp_path / "model" / "loadings.csv").exists()
    train = pd.read_csv(tmp_path / "model" / "train.csv")
    train.head(5).drop(columns=[f"y{j}" for j in range(1, 6)]).to_csv(tmp_path / "new.csv", index=False)

    target = tmp_path / "pred.csv"
    assert run("predict", "--model", str(tmp_path / "model"), "--locations", str(tmp_path / "new.csv"), "--out", str(target)) == 0
    pred = pd.read_csv(target)
    assert list(pred.columns) == ["id", "pc1", "pc2"] + [f"yhat_y{j}" for j in range(1, 6)]
    assert len(pred) == 5


def test_zero_hyperparameters_match_classical_loadings(tmp_path):
    zero = {"hyper": {"gamma": 0.0, "lambda1": 0.0, "lambda2": 0.0}}
    assert run("fit", "--out", str(tmp_path / "rappca"), override=zero) == 0
    assert run("fit", "--out", str(tmp_path / "classical"), override={"method": {"name": "classical", "r": 2}}) == 0
    a = pd.read_csv(tmp_path / "rappca" / "loadings.csv")[["pc1", "pc2"]].to_numpy()
    b = pd.read_csv(tmp_path / "classical" / "loadings.csv")[["pc1", "pc2"]].to_numpy()
    np.testing.assert_allclose(a, b, atol=1e-8)


def test_evaluate(tmp_path):
    assert run("evaluate", "--out", str(tmp_path / "eval")) == 0
    summary = pd.read_csv(tmp_path / "eval" / "summary.csv")
    assert set(summary["method"]) == {"rappca", "classical"}
    assert (tmp_path / "eval" / "metrics_rappca.csv").exists()


def test_tune(tmp_path):
    assert run("tune", "--out", str(tmp_path / "tune")) == 0
    selected = yaml.safe_load((tmp_path / "tune" / "selected.yaml").read_text())
    assert [s["component"] for s in selected["selected"]] == [1, 2]
    assert (tmp_path / "tune" / "scores_pc2.csv").exists()
    assert (tmp_path / "tune" / "model" / "metadata.yaml").exists()


def test_verify_optimality(tmp_path):
    assert run("verify-optimality", "--theta-grid", "36", "--out", str(tmp_path / "verify")) == 0
    summary = pd.read_csv(tmp_path / "verify" / "summary.csv")
    assert len(summary) == 6
    assert (summary["min_difference"] >= -1e-8).all()
    curves = pd.read_csv(tmp_path / "verify" / "curves.csv")
    assert (curves["difference"] >= -1e-8).all()


def test_rank_curves_and_gamma_sweep(tmp_path):
    assert run("rank-curves", "--rmax", "3", "--out", str(tmp_path / "rank")) == 0
    assert len(pd.read_csv(tmp_path / "rank" / "rank_curves.csv")) == 3
    assert run("gamma-sweep", "--out", str(tmp_path / "sweep")) == 0
    assert list(pd.read_csv(tmp_path / "sweep" / "gamma_sweep.csv")["gamma"]) == [0.0, 1.0]


def test_lambda_sweep(tmp_path):
    axes = {"verification": {"sweep_gammas": [0.0, 1.0], "sweep_lambda1s": [0.5, 1.0], "sweep_ratios": [1.0, 4.0]}}
    assert run("lambda-sweep", "--out", str(tmp_path / "surface"), override=axes) == 0
    table = pd.read_csv(tmp_path / "surface" / "lambda_sweep.csv")
    assert list(zip(table["lambda1"], table["ratio"])) == [(0.5, 1.0), (0.5, 4.0), (1.0, 1.0), (1.0, 4.0)]
    assert set(table["gamma"]) <= {0.0, 1.0}
    assert yaml.safe_load((tmp_path / "surface" / "manifest.yaml").read_text())["command"] == "lambda-sweep"


@pytest.mark.parametrize("override,code", [
    ({"method": {"name": "sparse"}}, 2),
    ({"hyper": {"lambda1": 0.0, "lambda2": 1.0}}, 2),
    ({"data": {"source": "csv", "path": "/nonexistent/data.csv", "outcome_cols": ["y1"]}}, 3),
    ({"method": {"r": 9}}, 2),
])
def test_exit_codes(tmp_path, override, code):
    assert run("fit", "--out", str(tmp_path / "out"), override=override) == code
    assert not (tmp_path / "out").exists()


def test_malformed_override(tmp_path):
    assert main(["fit", "--out", str(tmp_path / "out"), "--override", "{not json"]) == 2
