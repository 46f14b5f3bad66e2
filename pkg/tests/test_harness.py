import json
import math

import numpy as np
import pytest

from nprobust.attacks import AdversarialExample, make_attack
from nprobust.classifiers import KnnModel
from nprobust.errors import ProtocolError, StageError
from nprobust.harness import (
    ExperimentConfig, accuracy_vs_perturbation, curve_from_distances, defscore, dumps_report,
    empirical_robustness, ratio, run_experiment, sample_correct, strip_timings, synth_dataset,
)

from oracles import dataset


def fixed_attack(sizes):
    """An attack that moves point ``x`` by ``sizes[x[0]]`` along the first axis."""

    def attack(f, x):
        d = sizes[float(x[0])]
        if d is None:
            return AdversarialExample(x, None, math.inf, math.inf, 1, None)
        return AdversarialExample(x, x + np.array([d]), math.inf, d, 1, 2)

    return attack


ONE_CLASS = dataset([0.0, 1.0, 2.0], [1, 1, 1], 2)
CONST = KnnModel(ONE_CLASS, 1)


def test_er_arithmetic():
    er = empirical_robustness(fixed_attack({0.0: 0.4, 1.0: 0.4, 2.0: 0.4}), CONST,
                              ONE_CLASS.subset([0]), 1, seed=0)
    assert er.value == pytest.approx(0.4) and er.n == 1
    er = empirical_robustness(fixed_attack({0.0: 0.2, 1.0: 0.4, 2.0: None}), CONST,
                              ONE_CLASS.subset([0, 1]), 2, seed=0)
    assert er.value == pytest.approx(0.3)


def test_er_excludes_failures():
    er = empirical_robustness(fixed_attack({0.0: 0.2, 1.0: None, 2.0: 0.4}), CONST, ONE_CLASS, 3, seed=0)
    assert er.failures == 1 and er.value == pytest.approx(0.3)
    assert sorted(er.distances)[-1] == math.inf


def test_sampling_shortfall():
    with pytest.raises(ProtocolError, match="short by 1"):
        sample_correct(CONST, ONE_CLASS, 4, seed=0)


def test_sampling_is_shared_stream():
    test = dataset(np.arange(10.0), [1, 2] * 5)
    good = KnnModel(test, 1)
    half = KnnModel(dataset([0.0], [1], 2), 1)
    a = sample_correct(good, test, 5, seed=4)
    b = sample_correct(half, test, 3, seed=4)
    perm = [int(i) for i in np.random.default_rng(4).permutation(10)]
    assert a == perm[:5]
    assert b == [i for i in perm if test.y[i] == 1][:3]


def test_ratio_and_identity_defscore():
    assert ratio(0.4, 0.2) == 2.0
    train = synth_dataset("two-gaussians-overlap", 60, 0.3, seed=0)
    test = synth_dataset("two-gaussians-overlap", 40, 0.3, seed=1)
    res = defscore(lambda ds: ds, make_attack("rba-exact", "linf"), lambda ds: KnnModel(ds, 1),
                   train, test, 5, seed=0)
    assert res.value == 1.0


def test_curve_properties():
    curve = curve_from_distances([0.1, 0.2, 0.3, math.inf], [0, 0.15, 0.25, 1.0])
    assert [a for _, a in curve] == [1.0, 0.75, 0.5, 0.25]
    ds = synth_dataset("moons", 30, 0.1, seed=0)
    f = KnnModel(ds, 1)
    radii = np.linspace(0, 1.5, 16)
    curve = accuracy_vs_perturbation(f, make_attack("rba-exact", "linf"), ds, radii)
    acc = [a for _, a in curve]
    assert acc[0] == 1.0 and acc[-1] == 0.0
    assert all(x >= y for x, y in zip(acc, acc[1:]))


def test_synth_datasets():
    xor = synth_dataset("xor-grid", 4, 0.0, seed=0)
    assert xor.X.tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]] and xor.y.tolist() == [1, 2, 2, 1]
    a = synth_dataset("moons", 50, 0.1, seed=5)
    b = synth_dataset("moons", 50, 0.1, seed=5)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    with pytest.raises(ValueError):
        synth_dataset("spirals", 10, 0.1, seed=0)


def small_config(**over):
    doc = {
        "dataset": {"synth": {"kind": "two-gaussians-overlap", "n": 80, "noise": 0.3, "seed": 0}},
        "classifiers": [{"name": "1nn", "kind": "knn", "k": 1},
                        {"name": "dt", "kind": "dt", "max_depth": 3}],
        "defenses": [{"name": "ap", "kind": "ap", "r": 0.1},
                     {"name": "at", "kind": "at", "budget": 0.3}],
        "test_count": 30, "t": 8, "seed": 1,
    }
    doc.update(over)
    return ExperimentConfig.from_json(doc)


def test_run_experiment_artifacts(tmp_path):
    report = run_experiment(small_config(), tmp_path)
    assert [(r["classifier"], r["defense"]) for r in report["results"]] == [
        ("1nn", "none"), ("1nn", "ap"), ("1nn", "at"), ("dt", "none"), ("dt", "ap"), ("dt", "at")]
    assert (tmp_path / "tables" / "removed_pairs_ap.csv").exists()
    assert (tmp_path / "tables" / "curve_1nn_ap.csv").exists()
    assert json.loads((tmp_path / "report.json").read_text())["results"] == report["results"]

    # defscore recomputed from the per-point records
    recs = [json.loads(line) for line in (tmp_path / "adversarial.jsonl").read_text().splitlines()]
    for row in report["results"]:
        def er(defense):
            d = [r["er_distance"] for r in recs if r["classifier"] == row["classifier"] and r["defense"] == defense]
            return float(np.mean([v for v in d if v is not None]))
        assert abs(er(row["defense"]) / er("none") - row["defscore"]) <= 1e-12


def test_run_experiment_is_deterministic(tmp_path):
    a = run_experiment(small_config(), tmp_path / "a")
    b = run_experiment(small_config(), tmp_path / "b")
    assert dumps_report(strip_timings(a)) == dumps_report(strip_timings(b))
    assert "timings" in a


def test_missing_file_stage_error(tmp_path):
    cfg = small_config(dataset={"path": str(tmp_path / "nope.csv")})
    with pytest.raises(StageError) as err:
        run_experiment(cfg, tmp_path / "out")
    assert err.value.stage == "data/load"
    partial = json.loads((tmp_path / "out" / "report.json").read_text())
    assert partial["error"]["stage"] == "data/load"


def test_config_validation():
    with pytest.raises(ValueError):
        small_config(defenses=[{"name": "x", "kind": "magic"}])
    with pytest.raises(ValueError):
        small_config(t=0)
    cfg = ExperimentConfig.from_json({"dataset": {}, "classifier": {"name": "c", "kind": "knn"}})
    assert [d.name for d in cfg.defenses] == ["none"] and cfg.classifiers[0].name == "c"
