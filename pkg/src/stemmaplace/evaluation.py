"""Estimate scoring, Monte Carlo random baseline, and report rendering."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConfigError, DataError


class Empty(DataError):
    pass


class LengthMismatch(DataError):
    pass


class BadRange(ConfigError):
    pass


def _d_hat(e):
    return int(e.d_hat) if hasattr(e, "d_hat") else int(e)


@dataclass(frozen=True)
class EstimateReport:
    """Accuracy metrics for a batch of distance estimates.

    ratio and avg_deviation are exact rationals; sd is the population
    standard deviation of |d̂ − d|.
    """

    n: int
    correct: int
    ratio: Fraction
    avg_deviation: Fraction
    sd: float
    max_dist: int

    def to_dict(self):
        return {
            "n": self.n,
            "correct": self.correct,
            "ratio": float(self.ratio),
            "ratio_exact": str(self.ratio),
            "avg_deviation": float(self.avg_deviation),
            "avg_deviation_exact": str(self.avg_deviation),
            "sd": self.sd,
            "max_dist": self.max_dist,
        }


def score_estimates(estimates, truths) -> EstimateReport:
    """Compare estimates (ints or objects with .d_hat) to true distances."""
    preds = [_d_hat(e) for e in estimates]
    truths = [int(t) for t in truths]
    if len(preds) != len(truths):
        raise LengthMismatch(f"{len(preds)} estimates vs {len(truths)} truths")
    if not preds:
        raise Empty("nothing to score")
    n = len(preds)
    devs = [abs(p - t) for p, t in zip(preds, truths)]
    correct = sum(1 for d in devs if d == 0)
    avg = Fraction(sum(devs), n)
    sd = float(np.std(np.array(devs, dtype=np.float64)))
    return EstimateReport(
        n=n,
        correct=correct,
        ratio=Fraction(correct, n),
        avg_deviation=avg,
        sd=sd,
        max_dist=max(devs),
    )


@dataclass(frozen=True)
class BaselineReport:
    """Monte Carlo summary of uniform-random guessing on the same truths.

    empirical_p is the fraction of iterations whose correct count reached
    the observed one; None when no observed count was supplied.
    """

    iterations: int
    mean_correct: float
    mean_ratio: float
    mean_avg_deviation: float
    mean_sd: float
    max_dist_overall: int
    d_min: int
    d_max: int
    seed: int
    observed_correct: int | None = None
    empirical_p: Fraction | None = None

    def to_dict(self):
        d = {
            "iterations": self.iterations,
            "mean_correct": self.mean_correct,
            "mean_ratio": self.mean_ratio,
            "mean_avg_deviation": self.mean_avg_deviation,
            "mean_sd": self.mean_sd,
            "max_dist_overall": self.max_dist_overall,
            "d_min": self.d_min,
            "d_max": self.d_max,
            "seed": self.seed,
            "observed_correct": self.observed_correct,
            "empirical_p": None if self.empirical_p is None else float(self.empirical_p),
        }
        if self.empirical_p is not None:
            d["empirical_p_exact"] = str(self.empirical_p)
        return d


def _check_range(truths, d_min, d_max):
    if d_min > d_max:
        raise BadRange(f"empty range [{d_min}, {d_max}]")
    if not truths:
        raise Empty("no truths")


def run_baseline(truths, d_min, d_max, iterations=100_000, seed=0,
                 observed_correct=None) -> BaselineReport:
    """Uniform guessing in [d_min, d_max] against the truth multiset.

    Iteration i draws from a generator seeded [seed, i], so any subset of
    iterations can be recomputed independently and the result does not
    depend on execution order.
    """
    truths = [int(t) for t in truths]
    _check_range(truths, d_min, d_max)
    if iterations < 1:
        raise ConfigError(f"iterations must be >= 1, got {iterations}")
    t = np.array(truths, dtype=np.int64)
    n = t.size
    corrects = np.empty(iterations, dtype=np.int64)
    sum_avg = 0.0
    sum_sd = 0.0
    max_over = 0
    for i in range(iterations):
        rng = np.random.default_rng([seed, i])
        draw = rng.integers(d_min, d_max + 1, size=n)
        dev = np.abs(draw - t)
        corrects[i] = int((dev == 0).sum())
        sum_avg += dev.mean()
        sum_sd += dev.std()
        m = int(dev.max())
        if m > max_over:
            max_over = m
    p = None
    if observed_correct is not None:
        p = Fraction(int((corrects >= int(observed_correct)).sum()), iterations)
    return BaselineReport(
        iterations=iterations,
        mean_correct=float(corrects.mean()),
        mean_ratio=float(corrects.mean()) / n,
        mean_avg_deviation=sum_avg / iterations,
        mean_sd=sum_sd / iterations,
        max_dist_overall=max_over,
        d_min=d_min,
        d_max=d_max,
        seed=seed,
        observed_correct=None if observed_correct is None else int(observed_correct),
        empirical_p=p,
    )


def expected_baseline(truths, d_min, d_max):
    """Exact expectations for the uniform baseline, as Fractions.

    Returns {"ratio": E[correct ratio], "avg_deviation": E[mean |v − t|]}.
    E[ratio] is 1/K (K = range size) when every truth lies in range;
    out-of-range truths can never be matched, so they contribute 0.
    """
    truths = [int(t) for t in truths]
    _check_range(truths, d_min, d_max)
    K = d_max - d_min + 1
    in_range = sum(1 for t in truths if d_min <= t <= d_max)
    ratio = Fraction(in_range, len(truths) * K)
    dev_total = Fraction(0)
    for t in truths:
        dev_total += Fraction(sum(abs(v - t) for v in range(d_min, d_max + 1)), K)
    return {
        "ratio": ratio,
        "avg_deviation": dev_total / len(truths),
    }


def results_table(est_report: EstimateReport, baseline: BaselineReport = None,
                  placement: dict = None) -> str:
    """Aligned plain-text table of estimator vs baseline metrics."""
    rows = [
        ("", "estimator", "random baseline"),
        (
            "correct predictions",
            f"{est_report.correct}/{est_report.n} ({float(est_report.ratio):.2f})",
            "" if baseline is None else
            f"{baseline.mean_correct:.1f}/{est_report.n} ({baseline.mean_ratio:.2f})",
        ),
        (
            "average deviation",
            f"{float(est_report.avg_deviation):.2f} (SD: {est_report.sd:.2f})",
            "" if baseline is None else
            f"{baseline.mean_avg_deviation:.2f} (SD: {baseline.mean_sd:.2f})",
        ),
        (
            "max deviation",
            str(est_report.max_dist),
            "" if baseline is None else str(baseline.max_dist_overall),
        ),
    ]
    if baseline is not None and baseline.empirical_p is not None:
        rows.append(("empirical p", f"{float(baseline.empirical_p):.5f}", ""))
        rows.append(("iterations", "", str(baseline.iterations)))
    if placement is not None and "hitrate" in placement:
        rows.append(("hitrate", f"{placement['hitrate']:.2f}", ""))
        rows.append(("mean radius", f"{placement['mean_radius']:.2f}", ""))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    lines = []
    for r in rows:
        lines.append("  ".join(r[i].ljust(widths[i]) for i in range(3)).rstrip())
    return "\n".join(lines) + "\n"
