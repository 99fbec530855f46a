import math
from fractions import Fraction

import pytest

from stemmaplace.errors import ConfigError
from stemmaplace.estimator import DistanceEstimate
from stemmaplace.evaluation import (
    BadRange,
    BaselineReport,
    Empty,
    EstimateReport,
    LengthMismatch,
    expected_baseline,
    results_table,
    run_baseline,
    score_estimates,
)


class TestScoreEstimates:
    def test_hand_example(self):
        report = score_estimates([1, 2, 2], [1, 2, 3])
        assert report.n == 3
        assert report.correct == 2
        assert report.ratio == Fraction(2, 3)
        assert report.avg_deviation == Fraction(1, 3)
        assert report.max_dist == 1
        # deviations 0,0,1: population sd = sqrt(2)/3
        assert report.sd == pytest.approx(math.sqrt(2) / 3)

    def test_perfect(self):
        report = score_estimates([3, 1, 4], [3, 1, 4])
        assert report.ratio == 1
        assert report.avg_deviation == 0
        assert report.sd == 0.0
        assert report.max_dist == 0

    def test_accepts_estimate_objects(self):
        ests = [DistanceEstimate(query="q", other=str(i), d_hat=d)
                for i, d in enumerate([1, 5])]
        report = score_estimates(ests, [1, 2])
        assert report.correct == 1
        assert report.max_dist == 3

    def test_order_of_pairs_is_irrelevant(self):
        a = score_estimates([1, 2, 6], [2, 2, 3])
        b = score_estimates([6, 1, 2], [3, 2, 2])
        assert (a.ratio, a.avg_deviation, a.sd, a.max_dist) == (
            b.ratio, b.avg_deviation, b.sd, b.max_dist)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            score_estimates([1, 2], [1])

    def test_empty(self):
        with pytest.raises(Empty):
            score_estimates([], [])


class TestExpectedBaseline:
    def test_uniform_in_range(self):
        exp = expected_baseline([1, 2, 3], 1, 6)
        assert exp["ratio"] == Fraction(1, 6)

    def test_out_of_range_truth_cannot_be_hit(self):
        exp = expected_baseline([1, 9], 1, 2)
        assert exp["ratio"] == Fraction(1, 4)  # only the 1 is reachable: (1/2)/2

    def test_avg_deviation_single_truth(self):
        # truth 1, draws 1..3: |v-1| in {0,1,2} -> mean 1
        exp = expected_baseline([1], 1, 3)
        assert exp["avg_deviation"] == Fraction(1)

    def test_bad_range(self):
        with pytest.raises(BadRange):
            expected_baseline([1], 3, 2)
        with pytest.raises(Empty):
            expected_baseline([], 1, 2)


class TestRunBaseline:
    def test_matches_analytic_within_four_se(self):
        truths = [1, 2, 3, 4, 5, 6] * 40  # 240 truths
        iters = 2000
        report = run_baseline(truths, 1, 6, iterations=iters, seed=5)
        exp = expected_baseline(truths, 1, 6)
        n = len(truths)
        p = float(exp["ratio"])
        se_ratio = math.sqrt(p * (1 - p) / n / iters)
        assert abs(report.mean_ratio - p) < 4 * se_ratio
        # avg deviation concentrates even faster; allow a loose band
        assert abs(report.mean_avg_deviation - float(exp["avg_deviation"])) < 0.05
        assert report.max_dist_overall <= 5
        assert report.mean_correct == pytest.approx(report.mean_ratio * n)

    def test_deterministic_per_seed_and_order_free(self):
        truths = [1, 2, 3]
        a = run_baseline(truths, 1, 3, iterations=50, seed=7)
        b = run_baseline(truths, 1, 3, iterations=50, seed=7)
        assert a == b
        # first 25 iterations are a prefix: seeding is per iteration
        c = run_baseline(truths, 1, 3, iterations=25, seed=7)
        assert c.max_dist_overall <= a.max_dist_overall

    def test_empirical_p_counts_at_least_observed(self):
        truths = [1, 2, 3, 4] * 5
        report = run_baseline(truths, 1, 4, iterations=400, seed=1,
                              observed_correct=0)
        assert report.empirical_p == 1  # every iteration reaches 0 correct
        report_hi = run_baseline(truths, 1, 4, iterations=400, seed=1,
                                 observed_correct=len(truths) + 1)
        assert report_hi.empirical_p == 0

    def test_empirical_p_monotone_in_observed(self):
        truths = [1, 2, 3, 4, 5, 6] * 10
        previous = Fraction(2)
        for observed in (5, 10, 15, 20):
            rep = run_baseline(truths, 1, 6, iterations=300, seed=3,
                               observed_correct=observed)
            assert rep.empirical_p <= previous
            previous = rep.empirical_p

    def test_no_observed_no_p(self):
        rep = run_baseline([1], 1, 2, iterations=10, seed=0)
        assert rep.empirical_p is None
        assert rep.observed_correct is None
        assert rep.to_dict()["empirical_p"] is None

    def test_validation(self):
        with pytest.raises(BadRange):
            run_baseline([1], 2, 1, iterations=10)
        with pytest.raises(Empty):
            run_baseline([], 1, 2, iterations=10)
        with pytest.raises(ConfigError):
            run_baseline([1], 1, 2, iterations=0)


class TestReports:
    def test_estimate_report_dict_has_exact_strings(self):
        report = score_estimates([1, 2, 2], [1, 2, 3])
        d = report.to_dict()
        assert d["ratio_exact"] == "2/3"
        assert d["avg_deviation_exact"] == "1/3"
        assert d["ratio"] == pytest.approx(2 / 3)

    def test_baseline_report_dict(self):
        rep = run_baseline([1, 2], 1, 2, iterations=20, seed=0,
                           observed_correct=1)
        d = rep.to_dict()
        assert d["iterations"] == 20
        assert 0.0 <= d["empirical_p"] <= 1.0
        assert "/" in d["empirical_p_exact"] or d["empirical_p_exact"] in (
            "0", "1")

    def test_results_table_alignment_and_rows(self):
        est = score_estimates([1, 2, 2, 3], [1, 2, 3, 3])
        base = run_baseline([1, 2, 3, 3], 1, 3, iterations=50, seed=0,
                            observed_correct=est.correct)
        placement = {"hitrate": 0.75, "mean_radius": 0.25}
        text = results_table(est, base, placement)
        lines = text.splitlines()
        assert lines[0].startswith("   ")
        assert any(ln.startswith("correct predictions") for ln in lines)
        assert any(ln.startswith("average deviation") for ln in lines)
        assert any(ln.startswith("max deviation") for ln in lines)
        assert any(ln.startswith("empirical p") for ln in lines)
        assert any(ln.startswith("hitrate") for ln in lines)
        assert any(ln.startswith("mean radius") for ln in lines)
        assert text.endswith("\n")
        assert "3/4 (0.75)" in text

    def test_results_table_estimator_only(self):
        est = score_estimates([1], [1])
        text = results_table(est)
        assert "random baseline" in text
        assert "empirical p" not in text
        assert "hitrate" not in text
