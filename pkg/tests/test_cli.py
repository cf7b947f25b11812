import json

import pytest

from coldstart_crbm.cli import main
from coldstart_crbm.model import load_model
from coldstart_crbm.synthetic import planted_dataset


@pytest.fixture(scope="module")
def inputs(tmp_path_factory):
    d = tmp_path_factory.mktemp("inputs")
    data = planted_dataset(n_users=30, n_items=40, n_features=5, density=0.3, seed=0)
    data.ratings.write(d / "ratings.tsv")
    data.features.write(d / "features.csv")
    return d


@pytest.fixture(scope="module")
def run(inputs, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert main(["prepare", "--ratings", str(inputs / "ratings.tsv"), "--features",
                 str(inputs / "features.csv"), "--held-out", "10", "--out", str(out)]) == 0
    assert main(["train", "--out", str(out), "--hidden", "4", "--epochs", "2"]) == 0
    return out


def test_prepare_outputs(run):
    man = json.loads((run / "split" / "split.json").read_text())
    assert len(man["held_out_items"]) == 10
    for name in ("train.tsv", "test.tsv", "vocab.json", "features.csv"):
        assert (run / "split" / name).is_file()
    rm = json.loads((run / "run_prepare.json").read_text())
    assert rm["command"] == "prepare" and len(rm["inputs"]) == 2
    assert all(len(h) == 64 for h in rm["inputs"].values())


def test_prepare_zero_held_out(inputs, tmp_path):
    assert main(["prepare", "--ratings", str(inputs / "ratings.tsv"), "--features",
                 str(inputs / "features.csv"), "--held-out", "0", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "split" / "test.tsv").read_text().strip() == ""


def test_prepare_missing_features(inputs, tmp_path, capsys):
    code = main(["prepare", "--ratings", str(inputs / "ratings.tsv"), "--features",
                 str(tmp_path / "nope.csv"), "--out", str(tmp_path)])
    assert code == 2
    assert "nope.csv" in capsys.readouterr().err


def test_prepare_malformed_ratings(tmp_path, capsys):
    (tmp_path / "r.csv").write_text("1,1,4\n1,2\n")
    (tmp_path / "f.csv").write_text("1,x\n")
    code = main(["prepare", "--ratings", str(tmp_path / "r.csv"), "--features",
                 str(tmp_path / "f.csv"), "--held-out", "0", "--out", str(tmp_path)])
    assert code == 2
    assert ":2" in capsys.readouterr().err


def test_train_outputs(run):
    m = load_model(run / "model.json")
    assert (m.params.n_visible, m.params.n_hidden, m.params.n_features) == (30, 4, 5)
    assert m.config["epochs"] == 2 and m.config["task"] == "rating"
    lines = (run / "train_report.jsonl").read_text().splitlines()
    assert len(lines) == 2
    assert json.loads((run / "run_train.json").read_text())["config"]["hidden_units"] == 4


def test_train_twice_byte_identical(run, tmp_path):
    import shutil

    shutil.copytree(run / "split", tmp_path / "split")
    assert main(["train", "--out", str(tmp_path), "--hidden", "4", "--epochs", "2"]) == 0
    assert (tmp_path / "model.json").read_bytes() == (run / "model.json").read_bytes()


def test_train_config_file_and_bad_config(run, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"hidden_units": 3, "epochs": 1}))
    out = tmp_path / "o"
    out.mkdir()
    assert main(["train", "--out", str(out), "--split", str(run / "split"), "--config",
                 str(cfg), "--epochs", "2"]) == 0
    assert load_model(out / "model.json").config["epochs"] == 2
    assert main(["train", "--out", str(out), "--split", str(run / "split"), "--lr", "-1"]) == 2


def test_train_numeric_blowup(run, tmp_path):
    out = tmp_path / "o"
    out.mkdir()
    code = main(["train", "--out", str(out), "--split", str(run / "split"), "--hidden", "4",
                 "--epochs", "3", "--lr", "1e308", "--init-scale", "1"])
    assert code == 3
    assert (out / "model.json").is_file()


def test_evaluate(run):
    for task in ("rating", "explicit"):
        assert main(["evaluate", "--out", str(run), "--task", task]) == 0
        rep = json.loads((run / f"eval_{task}.json").read_text())
        assert 0 <= rep["auc"] <= 1
        assert (run / f"roc_{task}.csv").read_text().startswith("fpr,tpr\n")
    assert json.loads((run / "eval_explicit.json").read_text())["n_pairs"] == 30 * 10


def test_predict(run, tmp_path, capsys):
    labels = load_model(run / "model.json").feature_labels
    (tmp_path / "a.txt").write_text(f"{labels[0]},{labels[2]}\n")
    (tmp_path / "b.txt").write_text(f"{labels[2]}\n{labels[0]}\n{labels[0]}\n")
    capsys.readouterr()
    assert main(["predict", str(tmp_path / "a.txt"), "--out", str(run), "--top-k", "5"]) == 0
    a = json.loads(capsys.readouterr().out)
    assert main(["predict", str(tmp_path / "b.txt"), "--out", str(run), "--top-k", "5"]) == 0
    assert json.loads(capsys.readouterr().out) == a
    assert len(a) == 5 and a[0]["score"] >= a[-1]["score"]
    assert main(["predict", str(tmp_path / "a.txt"), "--out", str(run), "--top-k", "0"]) == 0
    assert json.loads(capsys.readouterr().out) == []
    assert main(["predict", str(tmp_path / "a.txt"), "--out", str(run), "--top-k", "3",
                 "--format", "csv", "--output", str(tmp_path / "p.csv")]) == 0
    rows = (tmp_path / "p.csv").read_text().splitlines()
    assert rows[0] == "user,score" and len(rows) == 4


def test_predict_unknown_labels(run, tmp_path, caplog):
    labels = load_model(run / "model.json").feature_labels
    (tmp_path / "some.txt").write_text(f"{labels[1]},Not A Feature\n")
    assert main(["predict", str(tmp_path / "some.txt"), "--out", str(run)]) == 0
    assert "Not A Feature" in caplog.text
    (tmp_path / "none.txt").write_text("Nothing,Known\n")
    assert main(["predict", str(tmp_path / "none.txt"), "--out", str(run)]) == 2


def test_cluster(run):
    assert main(["cluster", "--out", str(run), "--k", "2", "--top-n", "2"]) == 0
    first = (run / "clusters.txt").read_bytes()
    recs = json.loads((run / "clusters.json").read_text())
    assert len(recs) == 2 and all(len(r["top_labels"]) <= 2 for r in recs)
    assert main(["cluster", "--out", str(run), "--k", "2", "--top-n", "2"]) == 0
    assert (run / "clusters.txt").read_bytes() == first
    assert main(["cluster", "--out", str(run), "--k", "1", "--top-n", "10"]) == 0
    recs = json.loads((run / "clusters.json").read_text())
    assert recs[0]["size"] == 5
    assert main(["cluster", "--out", str(run), "--k", "99"]) == 2


def test_verify(capsys):
    assert main(["verify", "--trials", "5"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 3
    assert main(["verify", "--trials", "5", "--corrupt-sigmoid"]) == 4
    assert "FAIL conditional" in capsys.readouterr().out


def test_verify_zero_trials(caplog):
    assert main(["verify", "--trials", "0"]) == 0
    assert "trials=0" in caplog.text


def test_verify_bound():
    assert main(["verify", "--max-visible", "15", "--max-hidden", "6"]) == 2
