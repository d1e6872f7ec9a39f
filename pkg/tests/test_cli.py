import json

import numpy as np
import pytest

from gesturelab.cli import main
from gesturelab.data import load_dataset
from gesturelab.svm import load_model


def run_cli(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    code = run_cli("synth", "--out", out, "--subjects", 2, "--reps", 4, "--seed", 9)
    assert code == 0
    return out


def test_synth_writes_loadable_dataset(dataset_dir):
    samples = load_dataset(dataset_dir)
    assert len(samples) == 2 * 10 * 4
    assert all(len(s.images) == 1 for s in samples)


def test_extract_then_train_then_predict(tmp_path, dataset_dir):
    features = tmp_path / "features.npz"
    assert run_cli("extract", "--manifest", dataset_dir, "--out", features) == 0
    data = np.load(features)
    assert data["tracking"].shape == (80, 25)
    assert data["hog"].shape == (80, 1764)

    model_path = tmp_path / "model.json"
    code = run_cli(
        "train",
        "--features-file", features,
        "--features", "ang+dist+tip",
        "--k", 1.0,
        "--c", 10.0,
        "--gamma", 0.02,
        "--out", model_path,
    )
    assert code == 0
    model = load_model(model_path)
    assert model.n_pairs == 45
    assert model.preprocessing.fusion.hog_dim == 1764

    predictions = tmp_path / "pred.csv"
    code = run_cli(
        "predict",
        "--model", model_path,
        "--features-file", features,
        "--out", predictions,
    )
    assert code == 0
    lines = predictions.read_text().strip().split("\n")
    assert lines[0] == "sample_id,true,pred,votes"
    assert len(lines) == 81


def test_predict_from_dataset(tmp_path, dataset_dir):
    features = tmp_path / "f.npz"
    run_cli("extract", "--manifest", dataset_dir, "--no-hog", "--out", features)
    model_path = tmp_path / "model.json"
    code = run_cli(
        "train",
        "--features-file", features,
        "--no-hog",
        "--features", "ang+dist+tip",
        "--c", 10.0,
        "--gamma", 0.5,
        "--out", model_path,
    )
    assert code == 0
    out = tmp_path / "p.csv"
    code = run_cli("predict", "--model", model_path, "--manifest", dataset_dir, "--out", out)
    assert code == 0
    rows = out.read_text().strip().split("\n")[1:]
    correct = sum(r.split(",")[1] == r.split(",")[2] for r in rows)
    assert correct / len(rows) > 0.9  # training data, should be near-perfect


def test_grid_search_command(tmp_path, dataset_dir):
    cv = tmp_path / "cv.csv"
    code = run_cli(
        "grid-search",
        "--manifest", dataset_dir,
        "--no-hog",
        "--features", "ang+dist+tip",
        "--c-grid", "1,10",
        "--gamma-grid", "0.1,0.5",
        "--folds", 2,
        "--out", cv,
    )
    assert code == 0
    lines = cv.read_text().strip().split("\n")
    assert lines[0] == "c,gamma,accuracy"
    assert len(lines) == 5


def test_report_with_config_and_overrides(tmp_path, dataset_dir):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(
        json.dumps(
            {
                "manifest": str(dataset_dir),
                "features": "ang+dist+tip",
                "use_hog": False,
                "c_grid": [10.0],
                "gamma_grid": [0.5],
                "folds": 2,
                "repetitions": 3,
                "seed": 4,
            }
        )
    )
    out_dir = tmp_path / "out"
    code = run_cli("report", "--config", cfg_path, "--repetitions", 1, "--out-dir", out_dir)
    assert code == 0
    report = (out_dir / "report.csv").read_text().strip().split("\n")
    assert len(report) == 3  # header + 1 repetition + mean (flag override wins)


def test_ablation_command(tmp_path, dataset_dir):
    out_dir = tmp_path / "out"
    code = run_cli(
        "ablation",
        "--manifest", dataset_dir,
        "--combos", "ang+dist+tip;ang+dist+elev",
        "--c-grid", "10",
        "--gamma-grid", "0.5",
        "--folds", 2,
        "--repetitions", 1,
        "--seed", 4,
        "--out-dir", out_dir,
    )
    assert code == 0
    lines = (out_dir / "report.csv").read_text().strip().split("\n")
    combos = {line.split(",")[0] for line in lines[1:]}
    assert combos == {"ang+dist+tip", "ang+dist+elev"}


def test_sweep_command(tmp_path, dataset_dir):
    out_dir = tmp_path / "out"
    code = run_cli(
        "sweep",
        "--manifest", dataset_dir,
        "--k-values", "0.0,1.0",
        "--retentions", "none",
        "--c-grid", "10",
        "--gamma-grid", "0.02",
        "--folds", 2,
        "--repetitions", 1,
        "--seed", 4,
        "--out-dir", out_dir,
    )
    assert code == 0
    lines = (out_dir / "report.csv").read_text().strip().split("\n")
    assert len(lines) == 1 + 2 * 2  # two cells x (1 rep + mean)


def test_show_config_merges_flags(capsys):
    assert run_cli("show-config", "--seed", 123, "--no-hog") == 0
    merged = json.loads(capsys.readouterr().out)
    assert merged["seed"] == 123
    assert merged["use_hog"] is False


def test_exit_code_config_error():
    assert run_cli("report", "--bogus-flag") == 1
    assert run_cli("train", "--out", "x.json", "--features", "nope") == 1


def test_exit_code_config_file_missing(tmp_path):
    assert run_cli("report", "--config", tmp_path / "absent.json") == 1


def test_exit_code_data_error(tmp_path):
    assert run_cli("extract", "--manifest", tmp_path / "nope", "--out", tmp_path / "f.npz") == 2


def test_exit_code_nonconvergence(tmp_path, dataset_dir):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"svm_max_iter": 1, "use_hog": False}))
    code = run_cli(
        "train",
        "--config", cfg_path,
        "--manifest", dataset_dir,
        "--c", 10.0,
        "--gamma", 0.5,
        "--out", tmp_path / "model.json",
    )
    assert code == 3
    assert (tmp_path / "model.json").exists()  # model still written, flagged
