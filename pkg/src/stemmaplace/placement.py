"""Attach a held-back witness to a backbone tree from distance estimates.

Two rules.  Rule 1: exactly one backbone node was estimated at distance 1
— that node is the parent (only the true parent can sit at distance 1 from
a new leaf).  Rule 2 (otherwise): every estimate (x, d̂) is compatible with
attaching the query under any node y at distance d̂ − 1 from x, so it casts
one vote for each such y; the winners are the nodes with the maximal vote
count.  Ties are reported as a winner set, never broken: a k-way tie that
contains the true parent scores 1/k.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

from .errors import DataError
from .stemma import distance_matrix

RULE_UNIQUE = "unique_distance_one"
RULE_VOTING = "voting"


class MissingEstimate(DataError):
    pass


class EstimateForUnknownNode(DataError):
    pass


class DuplicateEstimate(DataError):
    pass


@dataclass(frozen=True)
class PlacementResult:
    """Outcome of placing one query witness.

    votes covers every backbone node (zero included).  radius, hit_credit
    and true_parent stay None until truth is attached; both metrics are
    exact rationals.  zero_distance_estimates lists nodes estimated at
    distance 0, which is impossible for a new leaf — they cast no vote and
    are surfaced for diagnostics.
    """

    query: str
    winners: tuple
    votes: dict
    rule_used: str
    zero_distance_estimates: tuple = ()
    radius: Fraction | None = None
    hit_credit: Fraction | None = None
    true_parent: str | None = None


def place(backbone, estimates, true_parent=None) -> PlacementResult:
    """Place the query described by `estimates` onto `backbone`.

    Requires exactly one estimate per backbone node, all for the same
    query, which itself must not be a backbone node.  When true_parent is
    given the result carries radius and hit_credit as well.
    """
    estimates = list(estimates)
    if not estimates:
        raise MissingEstimate(
            f"no estimates given; need one per backbone node: "
            f"{list(backbone.nodes)}"
        )
    queries = {e.query for e in estimates}
    if len(queries) > 1:
        raise DataError(f"estimates mix queries {sorted(map(str, queries))}")
    query = estimates[0].query
    if query in backbone:
        raise DataError(f"query {query!r} is already a backbone node")

    d_hat = {}
    for e in estimates:
        if e.other not in backbone:
            raise EstimateForUnknownNode(
                f"estimate for {e.other!r}, not a backbone node"
            )
        if e.other in d_hat:
            raise DuplicateEstimate(f"two estimates for node {e.other!r}")
        d_hat[e.other] = int(e.d_hat)
    missing = [n for n in backbone.nodes if n not in d_hat]
    if missing:
        raise MissingEstimate(f"no estimate for nodes {missing}")

    dm = distance_matrix(backbone)
    votes = {n: 0 for n in backbone.nodes}
    zero_d = tuple(sorted(n for n, d in d_hat.items() if d == 0))
    for x, d in d_hat.items():
        if d == 0:
            continue
        ix = dm.index_of(x)
        for y in backbone.nodes:
            if dm.d[dm.index_of(y), ix] == d - 1:
                votes[y] += 1

    ones = sorted(n for n, d in d_hat.items() if d == 1)
    if len(ones) == 1:
        winners = (ones[0],)
        rule = RULE_UNIQUE
    else:
        top = max(votes.values())
        winners = tuple(sorted(n for n, v in votes.items() if v == top))
        rule = RULE_VOTING

    result = PlacementResult(
        query=query,
        winners=winners,
        votes=votes,
        rule_used=rule,
        zero_distance_estimates=zero_d,
    )
    if true_parent is not None:
        result = with_truth(backbone, result, true_parent)
    return result


def placement_radius(backbone, result: PlacementResult, true_parent) -> Fraction:
    """Mean tree distance from the winners to the true parent (exact)."""
    dm = distance_matrix(backbone)
    it = dm.index_of(true_parent)  # raises UnknownNode for outsiders
    total = sum(int(dm.d[dm.index_of(w), it]) for w in result.winners)
    return Fraction(total, len(result.winners))


def with_truth(backbone, result: PlacementResult, true_parent) -> PlacementResult:
    """Attach the true parent: fills radius and hit_credit."""
    radius = placement_radius(backbone, result, true_parent)
    if true_parent in result.winners:
        credit = Fraction(1, len(result.winners))
    else:
        credit = Fraction(0)
    return replace(result, radius=radius, hit_credit=credit,
                   true_parent=true_parent)


def hitrate(results) -> Fraction:
    """Σ hit_credit / number of held-out leaves (exact rational)."""
    results = list(results)
    if not results:
        raise DataError("no placement results")
    total = Fraction(0)
    for r in results:
        if r.hit_credit is None:
            raise DataError(f"result for {r.query!r} has no truth attached")
        total += r.hit_credit
    return total / len(results)


def mean_radius(results) -> Fraction:
    """Mean placement radius over results (exact rational)."""
    results = list(results)
    if not results:
        raise DataError("no placement results")
    total = Fraction(0)
    for r in results:
        if r.radius is None:
            raise DataError(f"result for {r.query!r} has no truth attached")
        total += r.radius
    return total / len(results)


def placement_report(results) -> dict:
    """JSON-ready report: one block per leaf plus aggregate metrics.

    Rationals appear twice: as floats for reading and as exact "p/q"
    strings for byte-stable comparisons.
    """
    results = list(results)
    per_leaf = []
    with_truth_count = 0
    for r in results:
        block = {
            "query": r.query,
            "winners": list(r.winners),
            "votes": {n: int(v) for n, v in sorted(r.votes.items())},
            "rule_used": r.rule_used,
            "zero_distance_estimates": list(r.zero_distance_estimates),
        }
        if r.hit_credit is not None:
            with_truth_count += 1
            block["true_parent"] = r.true_parent
            block["hit_credit"] = float(r.hit_credit)
            block["hit_credit_exact"] = str(r.hit_credit)
            block["radius"] = float(r.radius)
            block["radius_exact"] = str(r.radius)
        per_leaf.append(block)
    report = {"leaves": per_leaf, "n_leaves": len(results)}
    if results and with_truth_count == len(results):
        hr = hitrate(results)
        mr = mean_radius(results)
        report["hitrate"] = float(hr)
        report["hitrate_exact"] = str(hr)
        report["mean_radius"] = float(mr)
        report["mean_radius_exact"] = str(mr)
    return report
