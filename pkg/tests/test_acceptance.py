"""End-to-end checks of the pipeline's core guarantees.

Each test pins one externally meaningful behavior: placement from perfect
distances, dataset bookkeeping, baseline calibration, gradient math,
trainability, the full learned pipeline against random guessing, the
reproduction harness, simulator statistics, and the edit-distance oracle.
The learned-pipeline test trains 36 small models and dominates the suite's
runtime; everything else finishes in seconds.
"""

import itertools
import json
import math
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from stemmaplace.collation import places_of_variation, recode_letters
from stemmaplace.estimator import (
    HyperParams,
    gradient_check,
    oracle_estimator,
    predict_batch,
    train,
)
from stemmaplace.evaluation import expected_baseline, run_baseline
from stemmaplace.pairgen import (
    EncodingConfig,
    generate_instances,
    holdout_split,
)
from stemmaplace.placement import RULE_UNIQUE, hitrate, mean_radius, place
from stemmaplace.scribesim import (
    ScribeConfig,
    damerau_levenshtein,
    generate_stemma,
    simulate_tradition,
)
from stemmaplace.stemma import Stemma, distance_matrix

from conftest import random_tree


@pytest.fixture(scope="module")
def balanced_tradition(balanced_tree):
    """21 witnesses on the balanced tree, enough noise for variation."""
    rng = np.random.default_rng(11)
    letters = list("abcdefghijklmnopqrstuvwxyz")
    words = ["".join(rng.choice(letters, size=5)) for _ in range(120)]
    trad = simulate_tradition(
        balanced_tree, " ".join(words),
        ScribeConfig(error_rate=0.02, correction_enabled=False, seed=2))
    collation = recode_letters(trad.collation)
    instances = generate_instances(collation, balanced_tree, EncodingConfig())
    return balanced_tree, collation, instances


def test_oracle_placement_recovers_every_parent(rng_factory):
    """Perfect distance estimates must pin every leaf to its true parent
    on arbitrary tree shapes: hitrate 1, radius 0, no tolerance."""
    rng = rng_factory(101)
    started = time.time()
    results = []
    for _ in range(200):
        tree = random_tree(int(rng.integers(5, 41)), rng)
        oracle = oracle_estimator(tree)
        for leaf in tree.leaves():
            backbone = tree.remove_leaf(leaf)
            ests = [oracle(leaf, node) for node in backbone.nodes]
            result = place(backbone, ests, true_parent=tree.parent(leaf))
            assert result.winners == (tree.parent(leaf),)
            assert result.rule_used == RULE_UNIQUE
            results.append(result)
    assert hitrate(results) == 1
    assert mean_radius(results) == 0
    assert time.time() - started < 60.0


def test_pair_counts_for_21_witness_holdout(balanced_tradition):
    """21 witnesses: 210 pairs; holding back one of the 12 leaves leaves
    190 train+valid pairs and 20 test pairs, 240 test estimates in all."""
    stemma, _, instances = balanced_tradition
    assert len(instances) == 210
    leaves = stemma.leaves()
    assert len(leaves) == 12
    total_test = 0
    for leaf in leaves:
        split = holdout_split(instances, leaf, valid_size=5, seed=0,
                              stemma=stemma)
        assert len(split.train) + len(split.valid) == 190
        assert len(split.test) == 20
        total_test += len(split.test)
    assert total_test == 240


def test_random_baseline_calibration(balanced_tradition):
    """Uniform guessing over [1, 6] against 240 real pair distances:
    the Monte Carlo means must sit on the analytic values."""
    stemma, _, instances = balanced_tradition
    truths = []
    for leaf in stemma.leaves():
        split = holdout_split(instances, leaf, valid_size=5, seed=0,
                              stemma=stemma)
        truths.extend(int(i.target) for i in split.test)
    assert len(truths) == 240
    assert all(1 <= t <= 6 for t in truths)

    started = time.time()
    report = run_baseline(truths, 1, 6, iterations=10_000, seed=42)
    exact = expected_baseline(truths, 1, 6)
    assert exact["ratio"] == Fraction(1, 6)
    assert abs(report.mean_ratio - 1 / 6) < 0.01
    assert abs(report.mean_avg_deviation - float(exact["avg_deviation"])) < 0.05
    assert report.max_dist_overall <= 5
    assert time.time() - started < 60.0


def test_gradients_match_finite_differences():
    """Analytic backpropagation vs central finite differences in double
    precision, across every parameter group of a small network."""
    started = time.time()
    max_err, per_param = gradient_check()
    assert max_err < 1e-4
    assert per_param, "no parameter groups checked"
    assert all(err < 1e-4 for err in per_param.values())
    assert time.time() - started < 60.0


@pytest.mark.slow
def test_overfits_twenty_instances(balanced_tradition):
    """At the default learning rate the estimator must memorize 20
    realistic instances to 100% exact predictions within 2000 steps."""
    stemma, _, instances = balanced_tradition
    split = holdout_split(instances, "A1x", valid_size=5, seed=0,
                          stemma=stemma)
    twenty = split.test
    assert len(twenty) == 20
    hp = HyperParams(embed_dim=32, hidden_dim=64, layers=1, batch_size=16,
                     train_steps=2000, valid_size=5, learning_rate=1e-3,
                     checkpoint_every=200, max_decode_len=8, seed=0)
    started = time.time()
    model, _ = train(twenty, split.valid, hp)
    ests = predict_batch(model, [i.source for i in twenty])
    exact = sum(1 for e, i in zip(ests, twenty) if str(e.d_hat) == i.target)
    assert exact == 20
    assert time.time() - started < 300.0


def test_reproduce_reports_reference_side_by_side(tmp_path):
    """The reproduction command chains the whole pipeline on supplied or
    simulated data and renders user-supplied metrics next to its own,
    without asserting agreement (run-to-run spread is expected)."""
    from stemmaplace.cli import COMPARISON_FILE, EVAL_FILE, main
    from stemmaplace.config import ExperimentConfig

    # the default profile is the full-scale configuration
    defaults = ExperimentConfig()
    assert (defaults.hidden_dim, defaults.embed_dim, defaults.layers,
            defaults.batch_size, defaults.train_steps,
            defaults.valid_size) == (512, 128, 1, 16, 7000, 5)

    out = tmp_path / "run"
    cfg_path = tmp_path / "exp.cfg"
    cfg_path.write_text(
        f"out_dir = {out}\n"
        "n_nodes = 8\n"
        "text_words = 60\n"
        "error_rate = 0.03\n"
        "seed = 5\n"
    )
    reference = tmp_path / "reference.json"
    reference.write_text(json.dumps(
        {"correct": 111, "n": 240, "ratio": 0.46, "hitrate": 0.79,
         "mean_radius": 0.5}))
    code = main(["reproduce", "--config", str(cfg_path), "--oracle",
                 "--reference-metrics", str(reference)])
    assert code == 0
    comparison = (out / COMPARISON_FILE).read_text()
    assert "this run" in comparison and "reference" in comparison
    for metric in ("ratio", "hitrate", "correct", "mean_radius"):
        assert metric in comparison
    ours = json.loads((out / EVAL_FILE).read_text())
    assert {"estimates", "baseline", "baseline_expected"} <= set(ours)


def test_scribe_corruption_statistics():
    """Corruption frequency tracks the configured rate to within 3 sigma
    over 10^5+ characters; word count is conserved; reruns are identical."""
    from stemmaplace.scribesim import copy_text

    rng = np.random.default_rng(31)
    letters = list("abcdefghijklmnopqrstuvwxyz")
    words = tuple("".join(rng.choice(letters, size=5)) for _ in range(25_000))
    total_chars = sum(len(w) for w in words)
    assert total_chars >= 100_000

    error_rate = 0.01
    cfg = ScribeConfig(error_rate=error_rate, correction_enabled=False, seed=8)
    edits = []
    copied = copy_text(words, cfg, np.random.default_rng(8), edits=edits)
    assert len(copied) == len(words)

    corruptions = sum(1 for e in edits if e["kind"] == "confusion")
    sigma = math.sqrt(error_rate * (1 - error_rate) / total_chars)
    assert abs(corruptions / total_chars - error_rate) <= 3 * sigma

    # byte-exact determinism of a whole simulated tradition
    tree = generate_stemma(9, 3, seed=4)
    text = " ".join(words[:500])
    sim_cfg = ScribeConfig(error_rate=0.01, correction_enabled=False, seed=6)
    a = simulate_tradition(tree, text, sim_cfg)
    b = simulate_tradition(tree, text, sim_cfg)
    assert a.collation == b.collation
    assert a.provenance == b.provenance


def test_edit_distance_exhaustive_small_alphabet():
    """The DP implementation must agree with the recursive definition on
    every ordered word pair of length <= 6 over {a, b, c}."""
    sys.setrecursionlimit(100_000)
    words = [""]
    for length in range(1, 7):
        words.extend("".join(t) for t in itertools.product("abc", repeat=length))
    assert len(words) == 1093

    memo = {}

    def reference(a, b):
        if not a:
            return len(b)
        if not b:
            return len(a)
        key = (a, b)
        hit = memo.get(key)
        if hit is not None:
            return hit
        best = min(
            reference(a[1:], b) + 1,
            reference(a, b[1:]) + 1,
            reference(a[1:], b[1:]) + (a[0] != b[0]),
        )
        if len(a) > 1 and len(b) > 1 and a[0] == b[1] and a[1] == b[0]:
            swap = reference(a[2:], b[2:]) + 1
            if swap < best:
                best = swap
        memo[key] = best
        return best

    started = time.time()
    for a in words:
        for b in words:
            assert damerau_levenshtein(a, b) == reference(a, b), (a, b)
    assert time.time() - started < 60.0


@pytest.mark.slow
def test_learned_estimator_beats_random_guessing():
    """Full pipeline on one simulated 21-witness tradition, three training
    seeds: the learned estimator's pooled exact-match count must beat
    uniform guessing decisively, and leaf placement must succeed on
    average (hitrate >= 0.5, mean radius <= 1.0).

    Runs 36 reduced-profile trainings; expect roughly an hour on one core.
    """
    stemma = generate_stemma(21, 3, seed=29)
    leaves = stemma.leaves()
    assert len(leaves) == 12
    dm = distance_matrix(stemma)
    assert int(dm.max_distance()) == 6

    rng = np.random.default_rng(77)
    letters = list("abcdefghijklmnopqrstuvwxyz")
    words = ["".join(rng.choice(letters, size=int(rng.integers(3, 9))))
             for _ in range(958)]
    trad = simulate_tradition(
        stemma, " ".join(words),
        ScribeConfig(error_rate=0.006, correction_enabled=False, seed=3))
    collation = recode_letters(trad.collation)
    variation = len(places_of_variation(collation)) / len(collation)
    assert 0.30 <= variation <= 0.60

    instances = generate_instances(collation, stemma, EncodingConfig())

    seed_ratios = []
    seed_hitrates = []
    seed_radii = []
    truths_once = None
    for train_seed in (0, 1, 2):
        hp = HyperParams(embed_dim=32, hidden_dim=64, layers=1, dropout=0.0,
                         batch_size=8, train_steps=1200, valid_size=5,
                         learning_rate=2e-3, grad_clip=5.0, seed=train_seed,
                         checkpoint_every=50, max_decode_len=8)
        correct = 0
        truths = []
        results = []
        for leaf in leaves:
            split = holdout_split(instances, leaf, valid_size=5, seed=0,
                                  stemma=stemma)
            model, _ = train(split.train, split.valid, hp, select_best=True)
            pairs = [(leaf, i.a if i.b == leaf else i.b) for i in split.test]
            ests = predict_batch(model, [i.source for i in split.test], pairs)
            for est, inst in zip(ests, split.test):
                truths.append(int(inst.target))
                if est.d_hat == int(inst.target):
                    correct += 1
            backbone = stemma.remove_leaf(leaf)
            results.append(place(backbone, ests,
                                 true_parent=stemma.parent(leaf)))
        assert len(truths) == 240
        truths_once = truths
        seed_ratios.append(correct / 240)
        seed_hitrates.append(hitrate(results))
        seed_radii.append(mean_radius(results))

    mean_correct = int(np.mean([r * 240 for r in seed_ratios]))
    baseline = run_baseline(truths_once, 1, 6, iterations=10_000, seed=1234,
                            observed_correct=mean_correct)
    assert baseline.empirical_p < Fraction(1, 100)
    assert float(np.mean([float(h) for h in seed_hitrates])) >= 0.5
    assert float(np.mean([float(r) for r in seed_radii])) <= 1.0
