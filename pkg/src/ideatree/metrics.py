"""pass@k estimators, curves, filtering statistics, and conditioning analysis.

All estimators work in product space so binomial coefficients never overflow,
even with hundreds of samples per problem.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EmptyDataset, EmptyGroup, ZeroBaseline

ESTIMATOR_CAVEAT = (
    "pass@k assumes samples are independent draws; plan-search candidates share "
    "pipeline ancestry, so their estimates may be slightly biased"
)


@dataclass(frozen=True)
class ProblemStats:
    """Per-problem sampling outcome counts feeding every estimator."""

    problem_id: str
    n: int
    c: int
    n_filtered: int
    c_filtered: int
    tokens_out_total: int = 0

    def __post_init__(self) -> None:
        if not (0 <= self.c <= self.n):
            raise ValueError("need 0 <= c <= n")
        if not (0 <= self.c_filtered <= self.n_filtered <= self.n):
            raise ValueError("need 0 <= c_filtered <= n_filtered <= n")


@dataclass(frozen=True)
class PassAtKCurve:
    """A labelled pass@k (or pass-per-token-budget) curve."""

    label: str
    points: tuple[tuple[float, float], ...]
    filtered: bool = False
    axis: str = "k"  # "k" or "tokens"

    @property
    def ks(self) -> tuple[float, ...]:
        return tuple(k for k, _v in self.points)

    @property
    def values(self) -> tuple[float, ...]:
        return tuple(v for _k, v in self.points)

    def value_at(self, k: float) -> float:
        for point_k, value in self.points:
            if point_k == k:
                return value
        raise KeyError(f"curve {self.label!r} has no point at {k}")


def pass_at_k_naive(p: float, k: int) -> float:
    """1 - (1-p)^k, evaluated stably for small p."""
    if not (0.0 <= p <= 1.0):
        raise ValueError("p must be in [0, 1]")
    if k < 1:
        raise ValueError("k must be >= 1")
    if p == 1.0:
        return 1.0
    return -math.expm1(k * math.log1p(-p))


def pass_at_k_unbiased(n: int, c: int, k: int) -> float:
    """Unbiased estimator 1 - C(n-c, k)/C(n, k), via a stable product.

    When k > n the pool is padded with failures up to k draws, so asking for
    more samples than were taken never inflates the estimate.
    """
    if n < 0 or not (0 <= c <= n):
        raise ValueError("need 0 <= c <= n")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        n = k
    if c == 0:
        return 0.0
    if n - c < k:
        return 1.0
    product = 1.0
    for i in range(k):
        product *= (n - c - i) / (n - i)
    return 1.0 - product


def dataset_pass_at_k(stats: Sequence[ProblemStats], k: int) -> float:
    """Unweighted mean of the per-problem unbiased estimates."""
    if not stats:
        raise EmptyDataset("no problem statistics")
    return sum(pass_at_k_unbiased(s.n, s.c, k) for s in stats) / len(stats)


def dataset_pass_at_k_naive(solve_probabilities: Sequence[float], k: int) -> float:
    """Dataset mean under the idealized per-problem solve-probability model."""
    if not solve_probabilities:
        raise EmptyDataset("no solve probabilities")
    return sum(pass_at_k_naive(p, k) for p in solve_probabilities) / len(
        solve_probabilities
    )


def filtered_pass_at_k(stats: ProblemStats, k: int) -> float:
    """pass@k over the public-test-filtered pool; an empty pool scores 0."""
    if stats.n_filtered == 0:
        return 0.0
    return pass_at_k_unbiased(stats.n_filtered, stats.c_filtered, k)


def dataset_filtered_pass_at_k(stats: Sequence[ProblemStats], k: int) -> float:
    if not stats:
        raise EmptyDataset("no problem statistics")
    return sum(filtered_pass_at_k(s, k) for s in stats) / len(stats)


def build_curve(
    label: str,
    stats: Sequence[ProblemStats],
    ks: Sequence[int],
    *,
    filtered: bool = False,
) -> PassAtKCurve:
    fn = dataset_filtered_pass_at_k if filtered else dataset_pass_at_k
    return PassAtKCurve(
        label=label,
        points=tuple((float(k), fn(stats, k)) for k in ks),
        filtered=filtered,
    )


def relative_improvement(curve: PassAtKCurve, baseline_pass1: float) -> PassAtKCurve:
    """Divide every point by the repeated-sampling pass@1 baseline."""
    if baseline_pass1 <= 0:
        raise ZeroBaseline("baseline pass@1 must be > 0")
    return PassAtKCurve(
        label=curve.label,
        points=tuple((k, v / baseline_pass1) for k, v in curve.points),
        filtered=curve.filtered,
        axis=curve.axis,
    )


def compute_normalized_curve(
    curve: PassAtKCurve, tokens_per_completion: float
) -> PassAtKCurve:
    """Re-key k onto a generated-token axis so methods compare at equal compute.

    The rate must be measured from run records (mean tokens per candidate),
    never assumed.
    """
    if tokens_per_completion <= 0:
        raise ValueError("tokens_per_completion must be > 0")
    return PassAtKCurve(
        label=curve.label,
        points=tuple((k * tokens_per_completion, v) for k, v in curve.points),
        filtered=curve.filtered,
        axis="tokens",
    )


@dataclass(frozen=True)
class GroupRate:
    problem_id: str
    group_id: str
    n: int
    c: int

    @property
    def rate(self) -> float:
        return self.c / self.n


@dataclass
class ConditioningReport:
    """Solve rates conditioned on each sketch versus pooled per problem.

    `polarization` is the mean over sketches of min(rate, 1 - rate): 0 when
    every sketch either always or never works, 0.5 at coin-flip rates.
    """

    per_sketch: list[GroupRate]
    per_problem: list[GroupRate]
    polarization: float


def conditional_solve_rates(
    records: Iterable[tuple[str, str, bool]],
) -> ConditioningReport:
    """Group (problem_id, sketch_id, passed) records into conditioned rates.

    Callers must already have excluded problems the model solves at exactly
    0% or 100% overall; duplicate sketch texts are kept distinct.
    """
    per_sketch: dict[tuple[str, str], list[bool]] = {}
    order: list[tuple[str, str]] = []
    for problem_id, sketch_id, passed in records:
        group = (problem_id, sketch_id)
        if group not in per_sketch:
            per_sketch[group] = []
            order.append(group)
        per_sketch[group].append(passed)
    if not per_sketch:
        raise EmptyGroup("no conditioning records")

    sketch_rates = [
        GroupRate(
            problem_id=problem_id,
            group_id=sketch_id,
            n=len(per_sketch[(problem_id, sketch_id)]),
            c=sum(per_sketch[(problem_id, sketch_id)]),
        )
        for problem_id, sketch_id in order
    ]

    per_problem: dict[str, list[bool]] = {}
    problem_order: list[str] = []
    for (problem_id, _sketch_id), outcomes in per_sketch.items():
        if problem_id not in per_problem:
            per_problem[problem_id] = []
            problem_order.append(problem_id)
        per_problem[problem_id].extend(outcomes)
    problem_rates = [
        GroupRate(
            problem_id=problem_id,
            group_id=problem_id,
            n=len(per_problem[problem_id]),
            c=sum(per_problem[problem_id]),
        )
        for problem_id in problem_order
    ]

    polarization = sum(min(g.rate, 1 - g.rate) for g in sketch_rates) / len(sketch_rates)
    return ConditioningReport(
        per_sketch=sketch_rates,
        per_problem=problem_rates,
        polarization=polarization,
    )


def write_curves_csv(curves: Sequence[PassAtKCurve], path: str | Path) -> None:
    """Emit curves as CSV with columns (method, k_or_tokens, value, filtered)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["method", "k_or_tokens", "value", "filtered"])
        for curve in curves:
            for k, value in curve.points:
                writer.writerow(
                    [
                        curve.label,
                        repr(k),
                        repr(value),
                        "1" if curve.filtered else "0",
                    ]
                )
