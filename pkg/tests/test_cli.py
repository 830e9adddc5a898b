from __future__ import annotations

import json

import numpy as np
import pytest

from cyclenilm import cli
from cyclenilm.dataset import read_dataset

CONFIG = """
[forest]
n_trees = 4
max_depth = 12

[mlp]
hidden = 16, 16, 16
max_epochs = 3
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "settings.ini"
    cfg.write_text(CONFIG)
    assert cli.main(["simulate", "--out", str(root / "corpus"), "--duration", "0.5"]) == 0
    assert cli.main(["build-dataset", "--corpus", str(root / "corpus"),
                     "--out", str(root / "data"), "--stride", "10"]) == 0
    models = root / "models"
    assert cli.main(["--config", str(cfg), "train-classifier", "--data", str(root / "data"),
                     "--out", str(models)]) == 0
    assert cli.main(["--config", str(cfg), "train-regressor", "--data", str(root / "data"),
                     "--out", str(models)]) == 0
    return root


def test_simulate_writes_seven_scenarios(workspace):
    dirs = sorted(p.name for p in (workspace / "corpus").iterdir())
    assert dirs == [f"dataset_{k}" for k in range(1, 8)]
    assert (workspace / "corpus" / "dataset_3" / "ground_truth.csv").exists()


def test_build_dataset_output(workspace):
    data = read_dataset(workspace / "data")
    assert len(data) > 0 and data.n_loads == 8
    assert set(np.unique(data.dataset_id)) == set(range(1, 8))


def test_training_outputs(workspace):
    models = workspace / "models"
    assert (models / "bank").is_dir() and (models / "regressors").is_dir()
    meta = json.loads((models / "features.json").read_text())
    assert meta["n_samples"] == 3334
    assert json.loads((models / "split.json").read_text())["strategy"] == "split80"


def _predict(workspace, *extra):
    scen = workspace / "corpus" / "dataset_2"
    out = workspace / f"pred{len(extra)}.csv"
    rc = cli.main(["predict", "--models", str(workspace / "models"),
                   "--input", str(scen / "i_tot.cswf"),
                   "--reference", str(scen / "voltage.cswf"), "--out", str(out), *extra])
    return rc, out


def test_predict_batch_and_stream_identical(workspace):
    rc, batch = _predict(workspace)
    assert rc == 0
    rc, stream = _predict(workspace, "--stream", "--chunk", "1000")
    assert rc == 0
    assert batch.read_text() == stream.read_text()
    rows = np.loadtxt(batch, delimiter=",", skiprows=1, ndmin=2)
    assert rows.shape[1] == 1 + 2 * 8
    assert rows.shape[0] >= 28


def test_evaluate_with_models(workspace, capsys):
    rc = cli.main(["evaluate", "--data", str(workspace / "data"),
                   "--models", str(workspace / "models"), "--seeds", "0",
                   "--out", str(workspace / "eval")])
    assert rc == 0
    rep = json.loads((workspace / "eval" / "report.json").read_text())
    assert len(rep["per_load_class_acc"]) == 8
    assert 0.0 <= rep["overall_class_acc"] <= 1.0


def test_evaluate_experiment(workspace, capsys):
    rc = cli.main(["--config", str(workspace / "settings.ini"), "evaluate",
                   "--data", str(workspace / "data"), "--seeds", "0", "1",
                   "--no-regression", "--out", str(workspace / "exp")])
    assert rc == 0
    agg = json.loads((workspace / "exp" / "aggregate.json").read_text())
    assert agg["n_runs"] == 2
    assert (workspace / "exp" / "aggregate.csv").exists()


def test_bench_reports_and_budget(workspace, capsys, monkeypatch):
    out = workspace / "timings.csv"
    rc = cli.main(["bench", "--models", str(workspace / "models"), "--n", "1000",
                   "--out", str(out)])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["n_cycles"] == 1000
    assert np.loadtxt(out, delimiter=",").shape == (1000, 5)
    monkeypatch.setattr(cli, "MEAN_BUDGET_MS", 0.0)
    rc = cli.main(["bench", "--models", str(workspace / "models"), "--n", "1000",
                   "--assert"])
    assert rc == cli.EXIT_BUDGET


@pytest.mark.parametrize("argv", [
    ["train-classifier", "--data", "/nonexistent/data", "--out", "/tmp/x"],
    ["evaluate", "--data", "/nonexistent/data"],
    ["--config", "/nonexistent.ini", "simulate", "--out", "/tmp/x"],
])
def test_invalid_inputs_exit_2(argv):
    assert cli.main(argv) == cli.EXIT_INVALID


def test_unknown_config_key_exit_2(workspace, tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[forest]\nn_treez = 3\n")
    rc = cli.main(["--config", str(bad), "train-classifier", "--data",
                   str(workspace / "data"), "--out", str(tmp_path / "m")])
    assert rc == cli.EXIT_INVALID


def test_unknown_strategy_exit_2(workspace, tmp_path):
    rc = cli.main(["train-classifier", "--data", str(workspace / "data"),
                   "--strategy", "kfold", "--out", str(tmp_path / "m")])
    assert rc == cli.EXIT_INVALID


def test_bench_bad_cycle_count_exit_2(workspace):
    rc = cli.main(["bench", "--models", str(workspace / "models"), "--n", "10"])
    assert rc == cli.EXIT_INVALID


def test_argparse_usage_error_exits_2():
    with pytest.raises(SystemExit) as exc:
        cli.main(["predict"])
    assert exc.value.code == 2
