import json

import numpy as np
import pytest

from symmflow.cli import gradcheck_report, main
from symmflow.datasets import read_points_csv

SMALL = {"dataset": {"n_per_class": 100}, "network": {"hidden": [16, 16]}, "train": {"epochs": 2, "batch_size": 64}}


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def small_run(tmp_path):
    cfg = tmp_path / "small.json"
    cfg.write_text(json.dumps(SMALL))
    out = tmp_path / "run"
    assert run("gen-data", "--config", cfg, "--out", out) == 0
    assert run("train", "--out", out) == 0
    return out


def test_gen_data_default_sizes_and_bytes(tmp_path, capsys):
    out = tmp_path / "a"
    assert run("gen-data", "--out", out) == 0
    x, lab = read_points_csv(out / "train.csv")
    xt, _ = read_points_csv(out / "test.csv")
    assert (len(x), len(xt)) == (1500, 500)
    first = (out / "train.csv").read_bytes(), (out / "test.csv").read_bytes()
    out.joinpath("config.json").unlink()
    assert run("gen-data", "--out", out) == 0
    assert ((out / "train.csv").read_bytes(), (out / "test.csv").read_bytes()) == first
    assert "1500 train / 500 test" in capsys.readouterr().out


@pytest.mark.parametrize(
    "bad,field",
    [({"train": {"epochs": "ten"}}, "train.epochs"), ({"dataset": {"bogus": 1}}, "dataset.bogus"),
     ({"solver": {"scheme": "heun"}}, "solver.scheme")],
)
def test_malformed_config_names_field(tmp_path, capsys, bad, field):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(bad))
    assert run("gen-data", "--config", cfg, "--out", tmp_path / "o") == 2
    assert field in capsys.readouterr().err
    assert not (tmp_path / "o" / "train.csv").exists()


def test_unparseable_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text("{nope")
    assert run("gen-data", "--config", cfg, "--out", tmp_path / "o") == 2
    assert "not valid JSON" in capsys.readouterr().err


def test_train_writes_artifacts(small_run):
    lines = (small_run / "loss.csv").read_text().splitlines()
    assert lines[0] == "epoch,mean_loss" and len(lines) == 3
    assert (small_run / "checkpoint.txt").read_text().startswith("# symmflow mlp checkpoint")


def test_train_conditional_objective(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({**SMALL, "train": {"epochs": 1, "objective": "conditional"}}))
    out = tmp_path / "r"
    assert run("gen-data", "--config", cfg, "--out", out) == 0
    assert run("train", "--out", out) == 0
    assert json.loads((out / "config.json").read_text())["train"]["objective"] == "conditional"


def test_resume_zero_epochs_keeps_checkpoint(small_run):
    before = (small_run / "checkpoint.txt").read_bytes()
    assert run("train", "--out", small_run, "--resume", "--epochs", 0) == 0
    assert (small_run / "checkpoint.txt").read_bytes() == before
    assert run("train", "--out", small_run, "--resume", "--epochs", 1) == 0
    assert (small_run / "checkpoint.txt").read_bytes() != before


def test_train_without_data_fails_cleanly(tmp_path, capsys):
    assert run("train", "--out", tmp_path) == 2
    assert "gen-data" in capsys.readouterr().err
    assert list(tmp_path.iterdir()) == []


def test_sample_outputs(small_run):
    assert run("sample", "--out", small_run, "--class", 0, "--n", 0) == 0
    assert (small_run / "samples_class0.csv").read_text() == "x0,x1,label\n"
    assert run("sample", "--out", small_run, "--class", 1, "--n", 30, "--svg") == 0
    first = (small_run / "samples_class1.csv").read_bytes()
    assert run("sample", "--out", small_run, "--class", 1, "--n", 30) == 0
    assert (small_run / "samples_class1.csv").read_bytes() == first
    x, lab = read_points_csv(small_run / "samples_class1.csv")
    assert x.shape == (30, 2) and set(lab) == {1}
    assert (small_run / "samples_class1.svg").read_text().startswith("<?xml")
    assert run("sample", "--out", small_run, "--class", 2, "--n", 5) == 2


def test_sample_default_uses_twenty_steps(small_run):
    assert run("sample", "--out", small_run, "--class", 0, "--n", 10) == 0
    a = (small_run / "samples_class0.csv").read_bytes()
    assert run("sample", "--out", small_run, "--class", 0, "--n", 10, "--steps", 20, "--scheme", "euler") == 0
    assert (small_run / "samples_class0.csv").read_bytes() == a


def test_classify_labelled_and_unlabelled(small_run, tmp_path):
    assert run("classify", "--out", small_run) == 0
    text = (small_run / "predictions.csv").read_text()
    assert text.splitlines()[0] == "x0,x1,pred,y0_0"
    assert text.splitlines()[-1].startswith("# accuracy,")
    assert len(text.splitlines()) == 1 + 50 + 1

    plain = tmp_path / "pts.csv"
    plain.write_text("x0,x1\n0.1,0.2\n-1,0.5\n")
    assert run("classify", "--out", small_run, "--input", plain) == 0
    lines = (small_run / "predictions.csv").read_text().splitlines()
    assert len(lines) == 3 and not any(l.startswith("#") for l in lines)


def test_classify_bayes(small_run):
    assert run("classify", "--out", small_run, "--method", "bayes") == 0
    lines = (small_run / "predictions.csv").read_text().splitlines()
    assert lines[0] == "x0,x1,pred,p0,p1"
    p = np.array([[float(v) for v in l.split(",")[3:]] for l in lines[1:-1]])
    assert np.all(np.abs(p.sum(1) - 1) <= 1e-12)


def test_classify_malformed_input(small_run, tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x0,x1\n0.1,zz\n")
    assert run("classify", "--out", small_run, "--input", bad) == 2
    assert "line 2" in capsys.readouterr().err


def test_sweep_rows(small_run):
    assert run("sweep", "--out", small_run, "--svg") == 0
    lines = (small_run / "sweep.csv").read_text().splitlines()
    assert lines[0] == "steps,accuracy"
    assert [int(l.split(",")[0]) for l in lines[1:]] == [1, 2, 5, 10, 20, 50]
    assert (small_run / "sweep.svg").exists()
    assert run("sweep", "--out", small_run, "--steps", 1) == 0
    assert len((small_run / "sweep.csv").read_text().splitlines()) == 2
    assert run("sweep", "--out", small_run, "--steps", "5,2") == 1


def test_gradcheck_pass_and_fail(capsys):
    assert run("gradcheck") == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "layer2.bias" in out
    assert run("gradcheck", "--corrupt-backward") == 1
    assert "FAIL" in capsys.readouterr().out


def test_gradcheck_report_layers():
    worst, rows = gradcheck_report(0)
    assert worst < 1e-4
    assert [r[0] for r in rows] == [f"layer{k}.{w}" for k in range(3) for w in ("weight", "bias")]


def test_no_tmp_files_left(small_run):
    run("sweep", "--out", small_run, "--steps", "3,1")
    assert not list(small_run.glob("*.tmp"))
