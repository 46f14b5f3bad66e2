"""Evaluation protocol: empirical robustness, defscore, accuracy curves and reports.

``run_experiment`` ties the pipeline together: load, preprocess, defend,
train, attack, summarize. Everything except wall-clock timings is a pure
function of the configuration, and the per-point attacks are independent, so
the worker count never changes a report.
"""

import csv
import io
import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from ._parallel import parallel_map
from .attacks import make_attack
from .classifiers import accuracy, train_classifier
from .data import Dataset, load_csv, pca_fit, pca_transform, scale_features, split
from .defense import adversarial_prune, adversarial_training
from .errors import ProtocolError, StageError
from .norms import lp_norm, norm_name, parse_norm

REPORT_FORMAT = "nprobust-report"
REPORT_VERSION = 1
TIMING_KEY = "timings"


# Metrics ------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ERResult:
    """Empirical robustness over the sampled points.

    ``distances`` holds one entry per evaluated point (``inf`` for failed
    attacks); ``value`` averages the finite ones.
    """

    value: float
    indices: tuple
    distances: tuple
    failures: int
    examples: tuple = ()

    def __float__(self):
        return self.value

    @property
    def n(self):
        return len(self.indices)


def sample_correct(f, test, t, seed):
    """The first ``t`` correctly-classified test indices in a seeded permutation."""
    if t < 1:
        raise ValueError("t must be >= 1")
    order = np.random.default_rng(seed).permutation(test.n)
    correct = f.predict_batch(test.X) == test.y
    picked = [int(i) for i in order if correct[i]][:t]
    if len(picked) < t:
        raise ProtocolError(f"only {len(picked)} correctly classified test points, {t} requested "
                            f"(short by {t - len(picked)})")
    return picked


def mean_finite(distances):
    finite = [d for d in distances if math.isfinite(d)]
    return float(np.mean(finite)) if finite else math.inf


def empirical_robustness(attack, f, test, t, seed, norm=math.inf, workers=None):
    """Mean perturbation size of ``attack`` over ``t`` sampled, correctly classified points.

    Sizes are measured in ``norm`` whatever norm the attack optimizes. Failed
    attacks count as ``inf`` and are left out of the mean.
    """
    norm = parse_norm(norm)
    idx = sample_correct(f, test, t, seed)
    examples = parallel_map(lambda i: attack(f, test.X[i]), idx, workers)
    dist = tuple(lp_norm(ae.original - ae.perturbed, norm) if ae.success else math.inf for ae in examples)
    failures = sum(1 for d in dist if not math.isfinite(d))
    return ERResult(mean_finite(dist), tuple(idx), dist, failures, tuple(examples))


@dataclass(frozen=True)
class DefscoreResult:
    value: float
    defended: ERResult
    undefended: ERResult

    def __float__(self):
        return self.value


def ratio(defended, undefended):
    if undefended == 0:
        return math.inf if defended > 0 else math.nan
    return defended / undefended


def defscore(defense, attack, trainer, train, test, t, seed, norm=math.inf, workers=None):
    """ER of the defended model over ER of the undefended one, on the same sampling stream.

    ``defense`` maps a training set to a training set and ``trainer`` maps a
    training set to a model.
    """
    f = trainer(train)
    f_def = trainer(defense(train))
    er = empirical_robustness(attack, f, test, t, seed, norm, workers)
    er_def = empirical_robustness(attack, f_def, test, t, seed, norm, workers)
    return DefscoreResult(ratio(er_def.value, er.value), er_def, er)


def curve_from_distances(distances, radii):
    """Fraction of points whose attack distance exceeds each radius."""
    d = np.asarray(distances, dtype=float)
    if d.size == 0:
        raise ValueError("no distances")
    return [(float(rho), float(np.mean(d > rho))) for rho in radii]


def accuracy_vs_perturbation(f, attack, points, radii, norm=math.inf, workers=None):
    """Robust accuracy of ``f`` on the labeled ``points`` at each radius.

    A misclassified point counts as distance 0; otherwise its attack distance
    in ``norm`` is used.
    """
    norm = parse_norm(norm)
    pred = f.predict_batch(points.X)

    def one(i):
        if pred[i] != points.y[i]:
            return 0.0
        ae = attack(f, points.X[i])
        return lp_norm(ae.original - ae.perturbed, norm) if ae.success else math.inf

    return curve_from_distances(parallel_map(one, range(points.n), workers), radii)


# Synthetic data ---------------------------------------------------------------------

SYNTH_KINDS = ("two-gaussians-overlap", "xor-grid", "moons")
_XOR_CORNERS = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
_XOR_LABELS = np.array([1, 2, 2, 1])


def synth_dataset(kind, n, noise, seed, separation=1.0):
    """Seeded 2D two-class data sets.

    ``two-gaussians-overlap``: isotropic Gaussians with standard deviation
    ``noise`` centered ``separation`` apart. ``xor-grid``: the four XOR
    corners in turn, jittered by ``noise``. ``moons``: two interleaved half
    circles with Gaussian ``noise``. Classes alternate, so any prefix is
    balanced.
    """
    if n < 4:
        raise ValueError("n must be at least 4")
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2 + 1
    if kind == "two-gaussians-overlap":
        centers = np.array([[0.5 - separation / 2, 0.5], [0.5 + separation / 2, 0.5]])
        X = centers[y - 1] + noise * rng.standard_normal((n, 2))
    elif kind == "xor-grid":
        corner = np.arange(n) % 4
        y = _XOR_LABELS[corner]
        X = _XOR_CORNERS[corner] + noise * rng.standard_normal((n, 2))
    elif kind == "moons":
        t = rng.uniform(0.0, math.pi, n)
        outer = np.stack([np.cos(t), np.sin(t)], axis=1)
        inner = np.stack([1.0 - np.cos(t), 0.5 - np.sin(t)], axis=1)
        X = np.where((y == 1)[:, None], outer, inner) + noise * rng.standard_normal((n, 2))
    else:
        raise ValueError(f"unknown synthetic kind {kind!r}; choose from {', '.join(SYNTH_KINDS)}")
    return Dataset(X, y, 2, ("A", "B"), ("x0", "x1"))


# Configuration -----------------------------------------------------------------------

@dataclass
class ClassifierSpec:
    name: str
    kind: str
    k: int = 1
    max_depth: int = 5
    n_trees: int = 100
    attack: dict = field(default_factory=dict)

    def trainer(self, seed):
        return lambda ds: train_classifier(self.kind, ds, k=self.k, max_depth=self.max_depth,
                                           n_trees=self.n_trees, seed=seed)


@dataclass
class DefenseSpec:
    name: str
    kind: str = "none"  # none | ap | at
    r: float = 0.3
    norm: str = "linf"
    budget: float = 0.3


_ATTACK_DEFAULTS = {"method": "rba-exact", "norm": "linf", "s_prime": 50, "eps_nudge": 1e-6}


@dataclass
class ExperimentConfig:
    """Parsed experiment description; see ``README.md`` for the JSON schema."""

    dataset: dict
    classifiers: list
    defenses: list
    attack: dict = field(default_factory=lambda: dict(_ATTACK_DEFAULTS))
    test_count: int = 100
    t: int = 100
    seed: int = 0
    er_norm: str = "linf"
    radii: list = field(default_factory=lambda: [round(0.05 * i, 2) for i in range(11)])
    workers: int | None = None

    def __post_init__(self):
        if self.t < 1:
            raise ValueError("t must be >= 1")
        self.attack = {**_ATTACK_DEFAULTS, **self.attack}
        self.classifiers = [c if isinstance(c, ClassifierSpec) else ClassifierSpec(**c) for c in self.classifiers]
        self.defenses = [d if isinstance(d, DefenseSpec) else DefenseSpec(**d) for d in self.defenses]
        names = [d.name for d in self.defenses]
        if "none" not in names:
            self.defenses.insert(0, DefenseSpec("none"))
        for d in self.defenses:
            if d.kind not in ("none", "ap", "at"):
                raise ValueError(f"unknown defense kind {d.kind!r}")
            if d.r < 0:
                raise ValueError("r must be non-negative")
        if len(set(c.name for c in self.classifiers)) != len(self.classifiers):
            raise ValueError("classifier names must be unique")

    @classmethod
    def from_json(cls, doc):
        doc = dict(doc)
        doc.pop("schema_version", None)
        clf = doc.pop("classifier", None)
        if clf is not None:
            doc["classifiers"] = [clf]
        dfn = doc.pop("defense", None)
        if dfn is not None:
            doc["defenses"] = [dfn]
        doc.setdefault("defenses", [])
        return cls(**doc)

    @classmethod
    def load(cls, path):
        return cls.from_json(json.loads(Path(path).read_text()))

    def to_json(self):
        out = asdict(self)
        out["schema_version"] = REPORT_VERSION
        out.pop("workers")
        return out

    def attack_for(self, spec):
        return {**self.attack, **spec.attack}


# Pipeline -----------------------------------------------------------------------------

class _Stages:
    """Runs named stages, timing them and wrapping failures in :class:`StageError`."""

    def __init__(self):
        self.timings = {}

    def run(self, name, fn, *args):
        start = time.perf_counter()
        try:
            return fn(*args)
        except StageError:
            raise
        except Exception as exc:  # noqa: BLE001 - any failure is reported with its stage
            raise StageError(name, exc) from exc
        finally:
            self.timings[name] = round(time.perf_counter() - start, 6)


def _load_data(spec):
    if "synth" in spec:
        s = spec["synth"]
        return synth_dataset(s["kind"], s["n"], s.get("noise", 0.1), s.get("seed", 0), s.get("separation", 1.0))
    path = spec["path"]
    if not Path(path).exists():
        raise FileNotFoundError(path)
    return load_csv(path, spec.get("label_col", -1))


def _preprocess(ds, spec, test_count, seed):
    # synthetic sets already live on a fixed scale; CSV data is mapped to [0, 1]
    if spec.get("scale", "synth" not in spec):
        ds, _ = scale_features(ds)
    train, test = split(ds, test_count, seed)
    p = spec.get("pca")
    if p:
        model = pca_fit(ds if spec.get("pca_fit") == "all" else train, p)
        train, test = pca_transform(model, train), pca_transform(model, test)
    return train, test


def _clean(v):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    return v


def run_experiment(cfg, out_dir=None):
    """Execute ``cfg`` and return the report dict; with ``out_dir`` also write artifacts.

    Files: ``report.json``, ``adversarial.jsonl`` and ``tables/*.csv``. On a
    stage failure the partial report is written (with an ``error`` entry)
    before the :class:`StageError` propagates.
    """
    stages = _Stages()
    report = {
        "format": REPORT_FORMAT,
        "schema_version": REPORT_VERSION,
        "config": cfg.to_json(),
        "metadata": {"seed": cfg.seed, "version": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "data": {},
        "results": [],
        "pruning": {},
        "curves": {},
    }
    records = []
    try:
        ds = stages.run("data/load", _load_data, cfg.dataset)
        train, test = stages.run("data/preprocess", _preprocess, ds, cfg.dataset, cfg.test_count, cfg.seed)
        report["data"] = {"n": ds.n, "n_train": train.n, "n_test": test.n, "d": train.d, "classes": ds.C}

        pruned = {}
        for d in cfg.defenses:
            if d.kind == "ap":
                res = stages.run(f"defense/{d.name}", adversarial_prune, train, d.r, d.norm)
                pruned[d.name] = res.pruned
                report["pruning"][d.name] = {
                    "r": d.r, "norm": norm_name(d.norm), "removed": list(res.removed),
                    "retained": res.pruned.n, "pairs": [list(p) for p in res.pairs], "warnings": list(res.warnings),
                }

        for c in cfg.classifiers:
            trainer = c.trainer(cfg.seed)
            a = cfg.attack_for(c)
            attack = make_attack(a["method"], a["norm"], a["s_prime"], a["eps_nudge"])
            base_er = None
            for d in cfg.defenses:
                tag = f"{c.name}/{d.name}"
                if d.kind == "none":
                    data = train
                elif d.kind == "ap":
                    data = pruned[d.name]
                else:
                    data = stages.run(f"defense/{tag}", adversarial_training, trainer, train, attack, d.budget,
                                      cfg.workers)
                model = stages.run(f"train/{tag}", trainer, data)
                acc = accuracy(model, test)
                er = stages.run(f"attack/{tag}", empirical_robustness, attack, model, test, cfg.t, cfg.seed,
                                cfg.er_norm, cfg.workers)
                if d.kind == "none":
                    base_er = er.value
                report["results"].append({
                    "classifier": c.name, "defense": d.name, "train_size": data.n, "accuracy": acc,
                    "er": er.value, "evaluated": er.n, "failures": er.failures,
                    "failure_rate": er.failures / er.n, "defscore": ratio(er.value, base_er),
                    "attack": {**a, "norm": norm_name(a["norm"])},
                })
                report["curves"][tag] = curve_from_distances(er.distances, cfg.radii)
                for i, ae in zip(er.indices, er.examples):
                    records.append({"classifier": c.name, "defense": d.name, "test_index": i,
                                    "er_distance": lp_norm(ae.original - ae.perturbed, cfg.er_norm)
                                    if ae.success else None, **ae.to_json()})
    except StageError as exc:
        report["error"] = {"stage": exc.stage, "message": str(exc.cause)}
        report[TIMING_KEY] = stages.timings
        if out_dir is not None:
            write_report(report, records, out_dir)
        raise
    report[TIMING_KEY] = stages.timings
    report = _clean(report)
    if out_dir is not None:
        write_report(report, records, out_dir)
    return report


def dumps_report(report):
    return json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"


def strip_timings(report):
    return {k: v for k, v in report.items() if k != TIMING_KEY}


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    return buf.getvalue()


def write_report(report, records, out_dir):
    out = Path(out_dir)
    tables = out / "tables"
    tables.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(dumps_report(report))
    with open(out / "adversarial.jsonl", "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(_clean(rec), sort_keys=True) + "\n")
    cols = ["classifier", "defense", "train_size", "accuracy", "er", "evaluated", "failures", "failure_rate",
            "defscore"]
    results = _clean(report.get("results", []))
    (tables / "summary.csv").write_text(_csv_text(cols, [[r[c] for c in cols] for r in results]))
    for name, info in report.get("pruning", {}).items():
        (tables / f"removed_pairs_{name}.csv").write_text(
            _csv_text(["removed_index", "nearest_opposite_index", "distance"], info["pairs"]))
    for tag, curve in report.get("curves", {}).items():
        (tables / f"curve_{tag.replace('/', '_')}.csv").write_text(_csv_text(["radius", "accuracy"], curve))


__all__ = [
    "ERResult", "DefscoreResult", "sample_correct", "empirical_robustness", "defscore", "ratio",
    "curve_from_distances", "accuracy_vs_perturbation", "synth_dataset", "SYNTH_KINDS", "ClassifierSpec",
    "DefenseSpec", "ExperimentConfig", "run_experiment", "write_report", "dumps_report", "strip_timings",
    "TIMING_KEY",
]
