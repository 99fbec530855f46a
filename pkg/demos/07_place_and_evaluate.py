"""
Placing a witness and scoring the result
========================================

Given one distance estimate from the query to every backbone witness,
placement votes for candidate attachment points: an estimate (x, d)
supports every node at distance d-1 from x, and the node with the most
support is the proposed parent.  An estimate of exactly 1 to a single
witness short-circuits the vote -- that witness must be the parent.
"""

import numpy as np

from stemmaplace import (
    DistanceEstimate,
    generate_stemma,
    hitrate,
    mean_radius,
    oracle_estimator,
    place,
    placement_report,
    results_table,
    run_baseline,
    score_estimates,
)

tree = generate_stemma(n_nodes=12, max_children=3, seed=9)
print("leaves:", tree.leaves())

# Oracle estimates (true tree distances) place every leaf perfectly.
estimate = oracle_estimator(tree)
results = []
for leaf in tree.leaves():
    backbone = tree.remove_leaf(leaf)
    ests = [estimate(leaf, w) for w in backbone.nodes]
    res = place(backbone, ests, true_parent=tree.parent(leaf))
    results.append(res)
    print(f"  {leaf}: rule={res.rule_used} winners={res.winners} "
          f"true={res.true_parent} credit={res.hit_credit}")
print("hitrate:", hitrate(results), "mean radius:", mean_radius(results))

# Now corrupt the estimates for one leaf and watch the vote spread.
leaf = tree.leaves()[0]
backbone = tree.remove_leaf(leaf)
rng = np.random.default_rng(0)
noisy = [
    DistanceEstimate(query=leaf, other=w,
                     d_hat=int(estimate(leaf, w).d_hat + rng.integers(-1, 2)))
    for w in backbone.nodes
]
res = place(backbone, noisy, true_parent=tree.parent(leaf))
print(f"\nnoisy placement of {leaf}: rule={res.rule_used} winners={res.winners} "
      f"true={res.true_parent} radius={res.radius}")
# With rule unique_distance_one the vote table is diagnostic only: a
# single estimate of exactly 1 decides the placement by itself.
print("votes:", dict(res.votes))
rep = placement_report([res])
print("report aggregates: hitrate", rep["hitrate_exact"],
      "mean radius", rep["mean_radius_exact"])

# Pair-level scoring: exact-match ratio and deviation of the estimates,
# against a random guesser over the same distance range.
truths = [int(estimate(leaf, w).d_hat) for w in backbone.nodes]
guesses = [e.d_hat for e in noisy]
report = score_estimates(guesses, truths)
baseline = run_baseline(truths, d_min=1, d_max=6, iterations=20_000, seed=4,
                        observed_correct=report.correct)
print()
print(results_table(report, baseline))
print("empirical p that random guessing does this well:",
      float(baseline.empirical_p))
