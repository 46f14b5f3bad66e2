"""Command-line interface: ``nprobust <command> ...``.

Commands: synth, prune, train, attack, evaluate, sweep, theory-check and
regions (a debug dump of a model's decomposition).
"""

import argparse
import copy
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .attacks import ATTACKS, make_attack
from .classifiers import load_model, save_model, train_classifier
from .data import ScaleTable, load_csv, save_csv, save_scale_table, scale_features
from .defense import adversarial_prune
from .errors import NprobustError, SolverError, StageError
from .geometry import enumerate_regions
from .harness import SYNTH_KINDS, ExperimentConfig, run_experiment, synth_dataset
from .norms import parse_norm
from .theory import load_instance, random_instance, theorem2_check

log = logging.getLogger("nprobust")


def _label_col(value):
    return int(value) if value.lstrip("-").isdigit() else value


def _write_pairs(path, pairs):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("removed_index,nearest_opposite_index,distance\n")
        for i, j, d in pairs:
            fh.write(f"{i},{j},{d!r}\n")


# Commands -----------------------------------------------------------------------

def cmd_synth(args):
    ds = synth_dataset(args.kind, args.n, args.noise, args.seed, args.separation)
    save_csv(ds, args.out)
    log.info("wrote %d points to %s", ds.n, args.out)


def cmd_prune(args):
    ds = load_csv(args.data, args.label_col)
    if args.scale:
        ds, _ = scale_features(ds)
    res = adversarial_prune(ds, args.r, args.norm)
    save_csv(res.pruned, args.out)
    pairs_path = args.pairs or str(Path(args.out).with_suffix("")) + ".removed.csv"
    _write_pairs(pairs_path, res.pairs)
    print(json.dumps({"n": ds.n, "retained": res.pruned.n, "removed": len(res.removed), "exact": res.exact,
                      "warnings": list(res.warnings), "pairs": pairs_path}))


def cmd_train(args):
    ds = load_csv(args.data, args.label_col)
    train_path, label_col = str(Path(args.data).resolve()), args.label_col
    if args.scale:
        ds, table = scale_features(ds)
        stem = str(Path(args.out).with_suffix(""))
        save_scale_table(table, stem + ".scale.json")
        save_csv(ds, stem + ".train.csv")
        train_path, label_col = str(Path(stem + ".train.csv").resolve()), -1
    model = train_classifier(args.kind, ds, k=args.k, max_depth=args.max_depth, n_trees=args.n_trees,
                             seed=args.seed)
    save_model(model, args.out, train_path, label_col)
    print(json.dumps({"model": args.out, "kind": args.kind, "train_accuracy":
                      float(np.mean(model.predict_batch(ds.X) == ds.y))}))


def cmd_attack(args):
    model = load_model(args.model)
    ds = load_csv(args.data, args.label_col)
    if args.scale_table:
        ds = ScaleTable.from_json(json.loads(Path(args.scale_table).read_text())).apply(ds)
    attack = make_attack(args.method, args.norm, args.s_prime, args.eps_nudge, args.target)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for i in range(ds.n):
            try:
                rec = {"row": i, **attack(model, ds.X[i]).to_json()}
            except SolverError as exc:
                if args.dump_tableau and exc.tableau is not None:
                    np.save(f"{args.dump_tableau}/tableau_row{i}.npy", exc.tableau)
                rec = {"row": i, "error": type(exc).__name__, "message": str(exc)}
            except NprobustError as exc:
                rec = {"row": i, "error": type(exc).__name__, "message": str(exc)}
            out.write(json.dumps(rec, sort_keys=True) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()


def cmd_evaluate(args):
    cfg = ExperimentConfig.load(args.config)
    if args.workers is not None:
        cfg.workers = args.workers
    report = run_experiment(cfg, args.out)
    for r in report["results"]:
        print(f"{r['classifier']:>10} {r['defense']:>8}  acc={r['accuracy']:.3f}  er={_fmt(r['er'])}  "
              f"defscore={_fmt(r['defscore'])}  failures={r['failures']}")


def _fmt(v):
    return "n/a" if v is None else f"{v:.4f}"


def cmd_sweep(args):
    """Re-run the experiment once per pruning radius."""
    base = ExperimentConfig.load(args.config)
    rows = []
    for r in args.radii:
        cfg = copy.deepcopy(base)
        for d in cfg.defenses:
            if d.kind == "ap":
                d.r = r
        if args.workers is not None:
            cfg.workers = args.workers
        out_dir = Path(args.out) / f"r={r:g}"
        report = run_experiment(cfg, out_dir)
        for res in report["results"]:
            rows.append((r, res["classifier"], res["defense"], res["accuracy"], res["er"], res["defscore"]))
    Path(args.out).mkdir(parents=True, exist_ok=True)
    with open(Path(args.out) / "sweep.csv", "w", encoding="utf-8") as fh:
        fh.write("r,classifier,defense,accuracy,er,defscore\n")
        for row in rows:
            fh.write(",".join("" if v is None else str(v) for v in row) + "\n")
    log.info("wrote %d rows to %s", len(rows), Path(args.out) / "sweep.csv")


def cmd_theory_check(args):
    if args.instance:
        instances = [load_instance(args.instance)]
    else:
        rng = np.random.default_rng(args.seed)
        instances = [random_instance(rng, args.size, args.classes) for _ in range(args.random)]
    ok = True
    for inst in instances:
        res = theorem2_check(inst, args.r, args.norm, args.max_size)
        ok &= res["dominates"] and res["feasibility_violations"] == 0
        print(json.dumps(res, sort_keys=True))
    return 0 if ok else 1


def cmd_regions(args):
    model = load_model(args.model)
    for n, region in enumerate(enumerate_regions(model)):
        if args.limit is not None and n >= args.limit:
            break
        print(json.dumps(region.to_json()))


# Parser --------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="nprobust", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic 2D data set")
    s.add_argument("--kind", choices=SYNTH_KINDS, default="two-gaussians-overlap")
    s.add_argument("--n", type=int, default=400)
    s.add_argument("--noise", type=float, default=0.3)
    s.add_argument("--separation", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("prune", help="adversarial pruning of a training CSV")
    s.add_argument("--data", required=True)
    s.add_argument("--label-col", type=_label_col, default=-1)
    s.add_argument("--r", type=float, default=0.3)
    s.add_argument("--norm", type=parse_norm, default=math.inf)
    s.add_argument("--scale", action="store_true", help="scale features to [0, 1] first")
    s.add_argument("--out", required=True)
    s.add_argument("--pairs", help="removed-pairs CSV (default: <out>.removed.csv)")
    s.set_defaults(func=cmd_prune)

    s = sub.add_parser("train", help="train a classifier and save it as JSON")
    s.add_argument("--data", required=True)
    s.add_argument("--label-col", type=_label_col, default=-1)
    s.add_argument("--kind", choices=("knn", "dt", "rf"), required=True)
    s.add_argument("--k", type=int, default=1)
    s.add_argument("--max-depth", type=int, default=5)
    s.add_argument("--n-trees", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--scale", action="store_true", help="scale features to [0, 1] and keep the table")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("attack", help="attack every row of a CSV; JSON lines out")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--label-col", type=_label_col, default=-1)
    s.add_argument("--scale-table")
    s.add_argument("--method", choices=ATTACKS, default="rba-exact")
    s.add_argument("--norm", type=parse_norm, default=math.inf)
    s.add_argument("--s-prime", type=int, default=50)
    s.add_argument("--target", type=int)
    s.add_argument("--eps-nudge", type=float, default=1e-6)
    s.add_argument("--dump-tableau", metavar="DIR", help="save the simplex tableau of solver failures")
    s.add_argument("--out")
    s.set_defaults(func=cmd_attack)

    s = sub.add_parser("evaluate", help="run an experiment config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep", help="run an experiment config over several pruning radii")
    s.add_argument("--config", required=True)
    s.add_argument("--radii", type=lambda v: [float(x) for x in v.split(",")], default=[0.0, 0.1, 0.2, 0.3])
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("theory-check", help="r-Optimal classifier against the 1-NN family")
    s.add_argument("--instance", help="instance JSON {points, mass, posterior}")
    s.add_argument("--random", type=int, default=5, help="number of random instances without --instance")
    s.add_argument("--size", type=int, default=6)
    s.add_argument("--classes", type=int, default=2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--r", type=float, default=0.1)
    s.add_argument("--norm", type=parse_norm, default=2)
    s.add_argument("--max-size", type=int, default=5)
    s.set_defaults(func=cmd_theory_check)

    s = sub.add_parser("regions", help="dump a model's decision regions as JSON lines")
    s.add_argument("--model", required=True)
    s.add_argument("--limit", type=int)
    s.set_defaults(func=cmd_regions)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args) or 0
    except StageError as exc:
        print(f"error in stage {exc.stage}: {exc.cause}", file=sys.stderr)
        return 2
    except (NprobustError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
