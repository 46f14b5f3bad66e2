import json

import pytest

from nprobust.cli import main


@pytest.fixture
def data(tmp_path):
    path = tmp_path / "d.csv"
    assert main(["synth", "--kind", "two-gaussians-overlap", "--n", "40", "--seed", "0", "--out", str(path)]) == 0
    return path


def test_synth_prune(tmp_path, data, capsys):
    out = tmp_path / "pruned.csv"
    assert main(["prune", "--data", str(data), "--r", "0.1", "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["n"] == 40 and summary["retained"] + summary["removed"] == 40
    assert (tmp_path / "pruned.removed.csv").read_text().startswith("removed_index,")


@pytest.mark.parametrize("kind", ["knn", "dt", "rf"])
def test_train_attack_regions(tmp_path, data, capsys, kind):
    model = tmp_path / f"{kind}.json"
    args = ["train", "--data", str(data), "--kind", kind, "--n-trees", "3", "--max-depth", "2",
            "--scale", "--out", str(model)]
    assert main(args) == 0
    assert json.loads(capsys.readouterr().out)["train_accuracy"] > 0.5
    out = tmp_path / "adv.jsonl"
    args = ["attack", "--model", str(model), "--data", str(data), "--scale-table",
            str(tmp_path / f"{kind}.scale.json"), "--method", "rba-approx", "--s-prime", "5",
            "--norm", "l2", "--out", str(out)]
    assert main(args) == 0
    recs = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(recs) == 40 and all(r["success"] for r in recs)
    assert main(["regions", "--model", str(model), "--limit", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert 1 <= len(lines) <= 3 and {"provenance", "label", "constraints"} <= set(json.loads(lines[0]))


def test_evaluate_and_sweep(tmp_path, capsys):
    cfg = {
        "dataset": {"synth": {"kind": "xor-grid", "n": 60, "noise": 0.15, "seed": 0}},
        "classifier": {"name": "1nn", "kind": "knn"},
        "defense": {"name": "ap", "kind": "ap", "r": 0.05},
        "test_count": 20, "t": 5,
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["evaluate", "--config", str(path), "--out", str(tmp_path / "run"), "--workers", "2"]) == 0
    assert "defscore=" in capsys.readouterr().out
    assert (tmp_path / "run" / "report.json").exists()
    assert main(["sweep", "--config", str(path), "--radii", "0,0.05", "--out", str(tmp_path / "sw")]) == 0
    rows = (tmp_path / "sw" / "sweep.csv").read_text().splitlines()
    assert rows[0] == "r,classifier,defense,accuracy,er,defscore" and len(rows) == 5


def test_theory_check(tmp_path, capsys):
    inst = {"points": [[0.0], [1.0]], "mass": [0.5, 0.5], "posterior": [[1, 0], [0, 1]]}
    path = tmp_path / "inst.json"
    path.write_text(json.dumps(inst))
    assert main(["theory-check", "--instance", str(path), "--r", "0.3"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["dominates"] and res["objective"] == 1.0
    assert main(["theory-check", "--random", "2", "--size", "4"]) == 0


def test_errors_exit_two(tmp_path, capsys):
    assert main(["prune", "--data", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "o.csv")]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("0.1,,A\n")
    assert main(["prune", "--data", str(bad), "--out", str(tmp_path / "o.csv")]) == 2
    assert "row 1" in capsys.readouterr().err
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dataset": {"path": str(tmp_path / "none.csv")},
                               "classifier": {"name": "c", "kind": "knn"}}))
    assert main(["evaluate", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 2
    assert "data/load" in capsys.readouterr().err
