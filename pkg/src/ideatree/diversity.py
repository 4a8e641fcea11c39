"""Idea-space diversity: pairwise similarity judging and the clique oracle.

The score for a pool is the fraction of unordered pairs judged *dissimilar*;
equivalently one minus the probability that two randomly chosen programs
implement the same idea. Similarity is judged once per unordered pair and is
deliberately not treated as transitive.
"""

from __future__ import annotations

import csv
import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .corpus import Problem
from .errors import InsufficientRuns, TooFewCandidates, ZeroBaseline
from .gateway import ChatRequest, Gateway, SamplingParams
from .prompts import PromptLibrary

logger = logging.getLogger(__name__)

SUBSAMPLE_CAP = 40


@dataclass(frozen=True)
class JudgedCode:
    """A program plus its natural-language idea, as shown to the judge."""

    key: str
    code: str
    idea: str


@dataclass(frozen=True)
class SimilarityJudgment:
    a_key: str
    b_key: str
    similar: bool
    judge_raw: str = ""
    unparsable: bool = False


def parse_yes_no(text: str) -> bool | None:
    """Lenient yes/no parse: case-insensitive, punctuation-tolerant."""
    word = text.strip().strip("\"'`").rstrip(".!").strip().lower()
    if word.startswith("yes"):
        return True
    if word.startswith("no"):
        return False
    return None


class SimilarityJudge:
    """LLM judge for one unordered pair; reprompts once on unparsable output.

    A still-unparsable judgment counts as *not similar* and is flagged, which
    biases the diversity score upward; reports surface the flag count.
    """

    def __init__(
        self,
        gateway: Gateway,
        model: str,
        params: SamplingParams | None = None,
        prompts: PromptLibrary | None = None,
    ) -> None:
        self.gateway = gateway
        self.model = model
        self.params = params or SamplingParams(temperature=0.0, top_p=0.95, max_tokens=16)
        self.prompts = prompts or PromptLibrary()

    def judge(self, problem: Problem, a: JudgedCode, b: JudgedCode) -> SimilarityJudgment:
        system = self.prompts.render("judge_system")
        user = self.prompts.render(
            "judge_user",
            problem=problem.statement,
            code_a=a.code,
            idea_a=a.idea,
            code_b=b.code,
            idea_b=b.idea,
        )
        first = self.gateway.complete(
            ChatRequest(model=self.model, system=system, turns=(("user", user),), params=self.params)
        )
        verdict = parse_yes_no(first.text)
        if verdict is not None:
            return SimilarityJudgment(a.key, b.key, similar=verdict, judge_raw=first.text)

        reprompt = self.prompts.render("judge_reprompt_user")
        second = self.gateway.complete(
            ChatRequest(
                model=self.model,
                system=system,
                turns=(("user", user), ("assistant", first.text), ("user", reprompt)),
                params=self.params,
            )
        )
        verdict = parse_yes_no(second.text)
        if verdict is not None:
            return SimilarityJudgment(a.key, b.key, similar=verdict, judge_raw=second.text)
        logger.warning("unparsable judgment for pair (%s, %s)", a.key, b.key)
        return SimilarityJudgment(
            a.key, b.key, similar=False, judge_raw=second.text, unparsable=True
        )

    def __call__(self, problem: Problem, a: JudgedCode, b: JudgedCode) -> SimilarityJudgment:
        return self.judge(problem, a, b)


@dataclass
class DiversityScore:
    """Pairwise diversity for one problem's candidate pool."""

    problem_id: str
    value: float
    pool_size: int
    total_pairs: int
    similar_pairs: int
    sampled: bool
    seed: int
    unparsable: int = 0


JudgeFn = Callable[[Problem, JudgedCode, JudgedCode], "SimilarityJudgment | bool"]


def diversity_score(
    problem: Problem,
    candidates: Sequence[JudgedCode],
    judge: JudgeFn,
    *,
    max_pool: int = SUBSAMPLE_CAP,
    seed: int = 0,
) -> DiversityScore:
    """Judge all pairs of a (possibly subsampled) pool and score diversity.

    Pools larger than `max_pool` are reduced to a uniform subsample drawn
    with the recorded seed.
    """
    if len(candidates) < 2:
        raise TooFewCandidates(f"need >= 2 candidates, got {len(candidates)}")
    pool = list(candidates)
    sampled = len(pool) > max_pool
    if sampled:
        pool = random.Random(seed).sample(pool, max_pool)

    similar = 0
    total = 0
    unparsable = 0
    for i in range(len(pool)):
        for j in range(i + 1, len(pool)):
            outcome = judge(problem, pool[i], pool[j])
            if isinstance(outcome, SimilarityJudgment):
                similar += outcome.similar
                unparsable += outcome.unparsable
            else:
                similar += bool(outcome)
            total += 1

    # Single division keeps the score exactly equal to the clique oracle on
    # synthetic pools (both are one correctly-rounded integer quotient).
    value = (total - similar) / total
    return DiversityScore(
        problem_id=problem.id,
        value=value,
        pool_size=len(pool),
        total_pairs=total,
        similar_pairs=similar,
        sampled=sampled,
        seed=seed,
        unparsable=unparsable,
    )


def clique_diversity(k: int, n: int) -> float:
    """Closed-form score for k idea cliques of n programs each: (k-1)n/(kn-1)."""
    if k < 1 or n < 1 or k * n < 2:
        raise ValueError("need k >= 1, n >= 1, and a pool of at least 2")
    return ((k - 1) * n) / (k * n - 1)


@dataclass
class DiversityReport:
    per_problem: dict[str, DiversityScore]
    dataset_diversity: float
    sampled: bool
    unparsable: int


def combine_scores(scores: Sequence[DiversityScore]) -> DiversityReport:
    if not scores:
        raise TooFewCandidates("no per-problem diversity scores")
    return DiversityReport(
        per_problem={s.problem_id: s for s in scores},
        dataset_diversity=sum(s.value for s in scores) / len(scores),
        sampled=any(s.sampled for s in scores),
        unparsable=sum(s.unparsable for s in scores),
    )


@dataclass(frozen=True)
class RunDiversity:
    """One run's headline numbers for the diversity-vs-gain comparison."""

    method: str
    model: str
    diversity: float
    pass_at_1: float
    pass_at_k: float

    @property
    def gain(self) -> float:
        if self.pass_at_1 <= 0:
            raise ZeroBaseline(f"run {self.method}/{self.model} has pass@1 of 0")
        return self.pass_at_k / self.pass_at_1


@dataclass
class DiversityGainReport:
    rows: list[RunDiversity]
    rank_correlation: float | None


def _ranks(values: Sequence[float]) -> np.ndarray:
    """Average ranks (ties share their mean rank)."""
    arr = np.asarray(values, dtype=float)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(len(arr), dtype=float)
    i = 0
    while i < len(arr):
        j = i
        while j + 1 < len(arr) and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    """Spearman rank correlation; None when either side is constant."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("need two equal-length sequences of length >= 2")
    rx, ry = _ranks(xs), _ranks(ys)
    if np.std(rx) == 0 or np.std(ry) == 0:
        return None
    return float(np.corrcoef(rx, ry)[0, 1])


def diversity_gain_report(runs: Sequence[RunDiversity]) -> DiversityGainReport:
    """Pair each run's diversity with its search gain and rank-correlate them."""
    if len(runs) < 3:
        raise InsufficientRuns(f"need >= 3 runs, got {len(runs)}")
    gains = [run.gain for run in runs]
    correlation = spearman([run.diversity for run in runs], gains)
    return DiversityGainReport(rows=list(runs), rank_correlation=correlation)


def write_gain_report(report: DiversityGainReport, csv_path: str | Path, json_path: str | Path) -> None:
    csv_path, json_path = Path(csv_path), Path(json_path)
    with csv_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["method", "model", "diversity", "pass1", "passk", "gain"])
        for run in report.rows:
            writer.writerow(
                [
                    run.method,
                    run.model,
                    repr(run.diversity),
                    repr(run.pass_at_1),
                    repr(run.pass_at_k),
                    repr(run.gain),
                ]
            )
    json_path.write_text(
        json.dumps(
            {
                "rank_correlation": report.rank_correlation,
                "runs": [
                    {
                        "method": run.method,
                        "model": run.model,
                        "diversity": run.diversity,
                        "pass1": run.pass_at_1,
                        "passk": run.pass_at_k,
                        "gain": run.gain,
                    }
                    for run in report.rows
                ],
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
