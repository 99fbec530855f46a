"""Command-line pipeline: simulate -> prepare -> train -> predict -> place -> eval.

Every command reads one plain-text config (``--set key=value`` overrides),
writes its artifacts under the config's out_dir, and drops a JSON manifest
recording the effective config, input/output hashes, seeds, and library
versions.  Reruns with the same config and seed are byte-identical except
for the manifests' "timing" section.  Exit codes: 0 success, 2 config
error, 3 data/IO error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .collation import load_collation, recode_letters, save_collation
from .config import ExperimentConfig, apply_overrides, derive_seed, load_config
from .errors import ConfigError, DataError, NumericalError
from .estimator import (
    DistanceEstimate,
    load_model,
    oracle_estimator,
    save_model,
    train,
)
from .evaluation import (
    expected_baseline,
    results_table,
    run_baseline,
    score_estimates,
)
from .pairgen import generate_instances, holdout_split, read_split_dir, write_split_dir
from .placement import place, placement_report
from .scribesim import (
    ScribeConfig,
    generate_stemma,
    load_confusion_csv,
    load_lexicon,
    simulate_tradition,
)
from .stemma import Stemma, distance_matrix, load_stemma

OUT_DIR_ENV = "STEMMAPLACE_OUT_DIR"

STEMMA_FILE = "stemma.tsv"
COLLATION_FILE = "collation.tsv"
PROVENANCE_FILE = "provenance.json"
SPLITS_DIR = "splits"
MODELS_DIR = "models"
ESTIMATES_DIR = "estimates"
PLACEMENT_FILE = "placement.json"
EVAL_FILE = "eval.json"
BASELINE_FILE = "baseline.json"
TABLE_FILE = "results_table.txt"
COMPARISON_FILE = "reference_comparison.txt"


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def _write_manifest(out_dir, command, cfg, inputs, outputs, seeds, started):
    manifest = {
        "command": command,
        "config": cfg.to_dict(),
        "inputs": {os.path.basename(p) if under(p, out_dir) else p: _sha256(p)
                   for p in sorted(inputs)},
        "outputs": {os.path.relpath(p, out_dir): _sha256(p)
                    for p in sorted(outputs)},
        "seeds": seeds,
        "versions": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "package": __version__,
        },
        "timing": {"seconds": round(time.time() - started, 3)},
    }
    try:
        import numba
        manifest["versions"]["numba"] = numba.__version__
    except ImportError:
        manifest["versions"]["numba"] = None
    path = os.path.join(out_dir, f"{command}_manifest.json")
    _write_json(path, manifest)
    return path


def under(path, directory):
    return os.path.abspath(path).startswith(os.path.abspath(directory) + os.sep)


def _effective_config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if getattr(args, "set", None):
        cfg = apply_overrides(cfg, args.set)
    env_out = os.environ.get(OUT_DIR_ENV)
    if env_out:
        cfg = apply_overrides(cfg, [f"out_dir={env_out}"])
    return cfg


def _artifact(cfg, configured, default_name, purpose):
    """Resolve an input path: explicit config key, else out_dir artifact."""
    path = configured if configured else os.path.join(cfg.out_dir, default_name)
    if not os.path.exists(path):
        raise DataError(f"{purpose} not found at {path}; run the earlier "
                        f"pipeline step or set its config key")
    return path


def _load_backbone_inputs(cfg):
    stemma_path = _artifact(cfg, cfg.stemma, STEMMA_FILE, "stemma")
    collation_path = _artifact(cfg, cfg.collation, COLLATION_FILE, "collation")
    with open(stemma_path, "r", encoding="utf-8") as f:
        stemma = load_stemma(f.read())
    with open(collation_path, "r", encoding="utf-8") as f:
        collation = load_collation(f.read())
    return stemma, collation, [stemma_path, collation_path]


def _encoded_collation(cfg, collation):
    if cfg.diff_type in ("variants_sorted", "variants_unsorted"):
        return recode_letters(collation, archetype=cfg.archetype)
    return collation


def _selected_leaves(args, stemma):
    if getattr(args, "all_leaves", False):
        return list(stemma.leaves())
    leaf = getattr(args, "held_leaf", None)
    if not leaf:
        raise ConfigError("pass --held-leaf <witness> or --all-leaves")
    return [leaf]


def _synth_root_text(cfg):
    """Deterministic word salad: text_words words of 3-8 letters."""
    rng = np.random.default_rng(derive_seed(cfg.seed, "root-text"))
    letters = np.array(list("abcdefghijklmnopqrstuvwxyz"))
    return [
        "".join(rng.choice(letters, size=int(rng.integers(3, 9))))
        for _ in range(cfg.text_words)
    ]


def _scribe_config(cfg):
    lexicon = ()
    if cfg.lexicon:
        with open(cfg.lexicon, "r", encoding="utf-8") as f:
            lexicon = load_lexicon(f.read())
    confusion = None
    if cfg.confusion_csv:
        with open(cfg.confusion_csv, "r", encoding="utf-8") as f:
            confusion = load_confusion_csv(f.read())
    return ScribeConfig(
        error_rate=cfg.error_rate,
        confusion=confusion,
        lexicon=lexicon,
        correction_enabled=cfg.correction_enabled,
        seed=cfg.seed,
    )


def cmd_simulate(cfg, args):
    started = time.time()
    os.makedirs(cfg.out_dir, exist_ok=True)
    inputs = [args.config]
    if cfg.stemma:
        with open(cfg.stemma, "r", encoding="utf-8") as f:
            stemma = load_stemma(f.read())
        inputs.append(cfg.stemma)
    else:
        stemma = generate_stemma(cfg.n_nodes, cfg.max_children,
                                 derive_seed(cfg.seed, "stemma"))
    if cfg.root_text:
        with open(cfg.root_text, "r", encoding="utf-8") as f:
            root_words = f.read().split()
        inputs.append(cfg.root_text)
    else:
        root_words = _synth_root_text(cfg)
    if cfg.lexicon:
        inputs.append(cfg.lexicon)
    if cfg.confusion_csv:
        inputs.append(cfg.confusion_csv)

    tradition = simulate_tradition(stemma, root_words, _scribe_config(cfg))

    stemma_path = os.path.join(cfg.out_dir, STEMMA_FILE)
    with open(stemma_path, "w", encoding="utf-8") as f:
        f.write(stemma.to_edge_list_text())
    collation_path = os.path.join(cfg.out_dir, COLLATION_FILE)
    with open(collation_path, "w", encoding="utf-8") as f:
        f.write(save_collation(tradition.collation))
    provenance_path = os.path.join(cfg.out_dir, PROVENANCE_FILE)
    _write_json(provenance_path, {
        "edges": [
            {"parent": p, "child": c, "edits": edits}
            for (p, c), edits in sorted(tradition.provenance.items())
        ],
    })
    _write_manifest(cfg.out_dir, "simulate", cfg, inputs,
                    [stemma_path, collation_path, provenance_path],
                    {"seed": cfg.seed}, started)
    print(f"simulate: {len(stemma)} witnesses, "
          f"{len(tradition.collation)} collation rows -> {cfg.out_dir}")
    return 0


def cmd_prepare(cfg, args):
    started = time.time()
    stemma, collation, inputs = _load_backbone_inputs(cfg)
    inputs.append(args.config)
    encoded = _encoded_collation(cfg, collation)
    instances = generate_instances(encoded, stemma, cfg.encoding())
    outputs = []
    leaves = _selected_leaves(args, stemma)
    for leaf in leaves:
        split = holdout_split(instances, leaf, valid_size=cfg.valid_size,
                              seed=cfg.seed, stemma=stemma)
        split_dir = os.path.join(cfg.out_dir, SPLITS_DIR, leaf)
        write_split_dir(split, cfg.encoding(), split_dir)
        outputs.extend(
            os.path.join(split_dir, name) for name in sorted(os.listdir(split_dir))
        )
        print(f"prepare: {leaf}: train {len(split.train)} valid "
              f"{len(split.valid)} test {len(split.test)}")
    _write_manifest(cfg.out_dir, "prepare", cfg, inputs, outputs,
                    {"seed": cfg.seed}, started)
    return 0


def _split_dir(cfg, leaf):
    path = os.path.join(cfg.out_dir, SPLITS_DIR, leaf)
    if not os.path.isdir(path):
        raise DataError(f"no prepared split at {path}; run prepare first")
    return path


def cmd_train(cfg, args):
    started = time.time()
    stemma, _, inputs = _load_backbone_inputs(cfg)
    inputs.append(args.config)
    hp = cfg.hyperparams()
    models_dir = os.path.join(cfg.out_dir, MODELS_DIR)
    os.makedirs(models_dir, exist_ok=True)
    outputs = []
    for leaf in _selected_leaves(args, stemma):
        split_dir = _split_dir(cfg, leaf)
        split, _, _ = read_split_dir(split_dir)
        model, log = train(split.train, split.valid, hp,
                           select_best=cfg.select_best)
        model_path = os.path.join(models_dir, f"{leaf}.model")
        save_model(model, model_path)
        log_path = os.path.join(models_dir, f"{leaf}_training_log.csv")
        with open(log_path, "w", encoding="utf-8") as f:
            f.write(log.to_csv())
        outputs.extend([model_path, log_path])
        best = log.best()
        print(f"train: {leaf}: final loss {log.entries[-1][1]:.4f}, "
              f"best valid acc {best[2]:.2f} at step {best[0]}")
    _write_manifest(cfg.out_dir, "train", cfg, inputs, outputs,
                    {"seed": cfg.seed, "train_seed": hp.seed}, started)
    return 0


def cmd_predict(cfg, args):
    started = time.time()
    stemma, _, inputs = _load_backbone_inputs(cfg)
    inputs.append(args.config)
    est_dir = os.path.join(cfg.out_dir, ESTIMATES_DIR)
    os.makedirs(est_dir, exist_ok=True)
    outputs = []
    for leaf in _selected_leaves(args, stemma):
        split, _, _ = read_split_dir(_split_dir(cfg, leaf))
        if args.oracle:
            oracle = oracle_estimator(stemma)
            estimates = [oracle(leaf, i.a if i.b == leaf else i.b)
                         for i in split.test]
        else:
            model_path = os.path.join(cfg.out_dir, MODELS_DIR, f"{leaf}.model")
            if not os.path.exists(model_path):
                raise DataError(f"no model at {model_path}; run train first")
            inputs.append(model_path)
            model = load_model(model_path)
            from .estimator import predict_batch
            pairs = [(leaf, i.a if i.b == leaf else i.b) for i in split.test]
            estimates = predict_batch(model, [i.source for i in split.test],
                                      pairs)
        payload = {
            "held_leaf": leaf,
            "estimates": [
                {
                    "query": e.query,
                    "other": e.other,
                    "d_hat": e.d_hat,
                    "raw_output": list(e.raw_output),
                    "truth": int(i.target),
                }
                for e, i in zip(estimates, split.test)
            ],
        }
        path = os.path.join(est_dir, f"{leaf}.json")
        _write_json(path, payload)
        outputs.append(path)
        correct = sum(1 for b in payload["estimates"] if b["d_hat"] == b["truth"])
        print(f"predict: {leaf}: {correct}/{len(payload['estimates'])} exact")
    _write_manifest(cfg.out_dir, "predict", cfg, inputs, outputs,
                    {"seed": cfg.seed}, started)
    return 0


def _leaves_with_estimates(cfg):
    est_dir = os.path.join(cfg.out_dir, ESTIMATES_DIR)
    if not os.path.isdir(est_dir):
        raise DataError(f"no estimates under {est_dir}; run predict first")
    leaves = sorted(
        name[: -len(".json")]
        for name in os.listdir(est_dir)
        if name.endswith(".json")
    )
    if not leaves:
        raise DataError(f"no estimate files under {est_dir}")
    return leaves


def _read_estimates(cfg, leaf):
    path = os.path.join(cfg.out_dir, ESTIMATES_DIR, f"{leaf}.json")
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    estimates = [
        DistanceEstimate(query=b["query"], other=b["other"], d_hat=b["d_hat"],
                         raw_output=tuple(b["raw_output"]))
        for b in payload["estimates"]
    ]
    truths = [b["truth"] for b in payload["estimates"]]
    return estimates, truths, path


def cmd_place(cfg, args):
    started = time.time()
    stemma, _, inputs = _load_backbone_inputs(cfg)
    inputs.append(args.config)
    if args.all_leaves or not args.held_leaf:
        leaves = (list(stemma.leaves()) if args.oracle
                  else _leaves_with_estimates(cfg))
    else:
        leaves = [args.held_leaf]
    results = []
    for leaf in leaves:
        if leaf not in stemma or not stemma.is_leaf(leaf):
            raise DataError(f"{leaf!r} is not a leaf of the stemma")
        backbone = stemma.remove_leaf(leaf)
        if args.oracle:
            oracle = oracle_estimator(stemma)
            estimates = [oracle(leaf, node) for node in backbone.nodes]
        else:
            estimates, _, path = _read_estimates(cfg, leaf)
            inputs.append(path)
        results.append(place(backbone, estimates,
                             true_parent=stemma.parent(leaf)))
    report = placement_report(results)
    path = os.path.join(cfg.out_dir, PLACEMENT_FILE)
    _write_json(path, report)
    _write_manifest(cfg.out_dir, "place", cfg, inputs, [path],
                    {"seed": cfg.seed}, started)
    if "hitrate" in report:
        print(f"place: hitrate {report['hitrate_exact']} "
              f"({report['hitrate']:.2f}), mean radius "
              f"{report['mean_radius_exact']} ({report['mean_radius']:.2f})")
    return 0


def _baseline_range(cfg, stemma):
    d_max = cfg.baseline_max
    if d_max is None:
        d_max = int(distance_matrix(stemma).max_distance())
    return cfg.baseline_min, d_max


def cmd_eval(cfg, args):
    started = time.time()
    stemma, _, inputs = _load_backbone_inputs(cfg)
    inputs.append(args.config)
    estimates = []
    truths = []
    for leaf in _leaves_with_estimates(cfg):
        ests, ts, path = _read_estimates(cfg, leaf)
        estimates.extend(ests)
        truths.extend(ts)
        inputs.append(path)
    report = score_estimates(estimates, truths)
    d_min, d_max = _baseline_range(cfg, stemma)
    baseline = run_baseline(truths, d_min, d_max,
                            iterations=cfg.baseline_iterations,
                            seed=derive_seed(cfg.seed, "baseline"),
                            observed_correct=report.correct)
    expected = expected_baseline(truths, d_min, d_max)
    placement = None
    placement_path = os.path.join(cfg.out_dir, PLACEMENT_FILE)
    if os.path.exists(placement_path):
        with open(placement_path, "r", encoding="utf-8") as f:
            placement = json.load(f)
        inputs.append(placement_path)

    payload = {
        "estimates": report.to_dict(),
        "baseline": baseline.to_dict(),
        "baseline_expected": {
            "ratio": float(expected["ratio"]),
            "ratio_exact": str(expected["ratio"]),
            "avg_deviation": float(expected["avg_deviation"]),
            "avg_deviation_exact": str(expected["avg_deviation"]),
        },
    }
    if placement is not None and "hitrate" in placement:
        payload["placement"] = {
            "hitrate": placement["hitrate"],
            "hitrate_exact": placement["hitrate_exact"],
            "mean_radius": placement["mean_radius"],
            "mean_radius_exact": placement["mean_radius_exact"],
        }
    eval_path = os.path.join(cfg.out_dir, EVAL_FILE)
    _write_json(eval_path, payload)
    table = results_table(report, baseline, placement)
    table_path = os.path.join(cfg.out_dir, TABLE_FILE)
    with open(table_path, "w", encoding="utf-8") as f:
        f.write(table)
    _write_manifest(cfg.out_dir, "eval", cfg, inputs,
                    [eval_path, table_path],
                    {"seed": cfg.seed,
                     "baseline_seed": derive_seed(cfg.seed, "baseline")},
                    started)
    print(table, end="")
    return 0


def cmd_baseline(cfg, args):
    started = time.time()
    stemma, _, inputs = _load_backbone_inputs(cfg)
    inputs.append(args.config)
    truths = []
    splits_root = os.path.join(cfg.out_dir, SPLITS_DIR)
    if not os.path.isdir(splits_root):
        raise DataError(f"no splits under {splits_root}; run prepare first")
    for leaf in sorted(os.listdir(splits_root)):
        split, _, _ = read_split_dir(os.path.join(splits_root, leaf))
        truths.extend(int(i.target) for i in split.test)
    d_min, d_max = _baseline_range(cfg, stemma)
    baseline = run_baseline(truths, d_min, d_max,
                            iterations=cfg.baseline_iterations,
                            seed=derive_seed(cfg.seed, "baseline"))
    expected = expected_baseline(truths, d_min, d_max)
    path = os.path.join(cfg.out_dir, BASELINE_FILE)
    _write_json(path, {
        "baseline": baseline.to_dict(),
        "expected": {
            "ratio": float(expected["ratio"]),
            "ratio_exact": str(expected["ratio"]),
            "avg_deviation": float(expected["avg_deviation"]),
            "avg_deviation_exact": str(expected["avg_deviation"]),
        },
        "n_truths": len(truths),
    })
    _write_manifest(cfg.out_dir, "baseline", cfg, inputs, [path],
                    {"seed": cfg.seed,
                     "baseline_seed": derive_seed(cfg.seed, "baseline")},
                    started)
    print(f"baseline: mean ratio {baseline.mean_ratio:.3f} over "
          f"{baseline.iterations} iterations in [{d_min}, {d_max}]")
    return 0


def _reference_comparison(cfg, reference_path):
    """Side-by-side table: this run's metrics next to user-supplied ones."""
    with open(os.path.join(cfg.out_dir, EVAL_FILE), "r", encoding="utf-8") as f:
        ours = json.load(f)
    with open(reference_path, "r", encoding="utf-8") as f:
        reference = json.load(f)
    rows = [("metric", "this run", "reference")]
    flat_ours = {
        "ratio": f"{ours['estimates']['ratio']:.3f}",
        "correct": str(ours["estimates"]["correct"]),
        "n": str(ours["estimates"]["n"]),
        "avg_deviation": f"{ours['estimates']['avg_deviation']:.3f}",
        "sd": f"{ours['estimates']['sd']:.3f}",
        "max_dist": str(ours["estimates"]["max_dist"]),
    }
    if "placement" in ours:
        flat_ours["hitrate"] = f"{ours['placement']['hitrate']:.3f}"
        flat_ours["mean_radius"] = f"{ours['placement']['mean_radius']:.3f}"
    for key in sorted(set(flat_ours) | set(map(str, reference))):
        rows.append((key, flat_ours.get(key, "-"), str(reference.get(key, "-"))))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    lines = ["  ".join(r[i].ljust(widths[i]) for i in range(3)).rstrip()
             for r in rows]
    return "\n".join(lines) + "\n"


def cmd_reproduce(cfg, args):
    started = time.time()
    inputs = [args.config]
    have_data = (cfg.collation and cfg.stemma
                 and os.path.exists(cfg.collation) and os.path.exists(cfg.stemma))
    if not have_data:
        cmd_simulate(cfg, args)

    class _Sub:
        config = args.config
        set = None
        all_leaves = True
        held_leaf = None
        oracle = getattr(args, "oracle", False)

    sub = _Sub()
    cmd_prepare(cfg, sub)
    if not sub.oracle:
        cmd_train(cfg, sub)
    cmd_predict(cfg, sub)
    cmd_place(cfg, sub)
    cmd_eval(cfg, sub)
    outputs = []
    if args.reference_metrics:
        inputs.append(args.reference_metrics)
        comparison = _reference_comparison(cfg, args.reference_metrics)
        path = os.path.join(cfg.out_dir, COMPARISON_FILE)
        with open(path, "w", encoding="utf-8") as f:
            f.write(comparison)
        outputs.append(path)
        print(comparison, end="")
    _write_manifest(cfg.out_dir, "reproduce", cfg, inputs, outputs,
                    {"seed": cfg.seed}, started)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stemmaplace",
        description="Witness placement on a stemma via learned pairwise "
                    "distance estimates.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, leaf_flags=False, oracle=False):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to key=value config")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        if leaf_flags:
            group = p.add_mutually_exclusive_group()
            group.add_argument("--held-leaf", help="process one held-back leaf")
            group.add_argument("--all-leaves", action="store_true",
                               help="process every leaf of the stemma")
        if oracle:
            p.add_argument("--oracle", action="store_true",
                           help="use true tree distances instead of a model")
        p.set_defaults(func=func)
        return p

    add("simulate", cmd_simulate, "generate a tradition: stemma + collation")
    add("prepare", cmd_prepare, "encode pairs and write hold-out splits",
        leaf_flags=True)
    add("train", cmd_train, "train the distance estimator per held leaf",
        leaf_flags=True)
    add("predict", cmd_predict, "estimate test-pair distances",
        leaf_flags=True, oracle=True)
    add("place", cmd_place, "place held-back leaves on the backbone",
        leaf_flags=True, oracle=True)
    add("eval", cmd_eval, "score estimates against the random baseline")
    add("baseline", cmd_baseline, "run the random baseline alone")
    p_rep = add("reproduce", cmd_reproduce,
                "chain simulate/prepare/train/predict/place/eval", oracle=True)
    p_rep.add_argument("--reference-metrics", metavar="JSON",
                       help="user-supplied metrics JSON for a side-by-side table")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _effective_config(args)
        os.makedirs(cfg.out_dir, exist_ok=True)
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
