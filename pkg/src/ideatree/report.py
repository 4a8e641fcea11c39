"""Cross-run reporting: summary tables, relative and compute-normalized curves,
bar-chart data, and the diversity pipeline over finished runs.
"""

from __future__ import annotations

import csv
import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path

from .corpus import load_dataset
from .diversity import (
    DiversityGainReport,
    DiversityScore,
    JudgedCode,
    RunDiversity,
    SimilarityJudge,
    SUBSAMPLE_CAP,
    combine_scores,
    diversity_gain_report,
    diversity_score,
    write_gain_report,
)
from .errors import ConfigError, MissingBaseline, SketchEmpty, TooFewCandidates
from .gateway import Gateway, Provider, SamplingParams
from .metrics import PassAtKCurve, compute_normalized_curve, relative_improvement
from .prompts import PromptLibrary
from .runner import (
    RunArtifacts,
    build_provider,
    ProviderSettings,
    read_curves,
    read_jsonl,
)
from .search import Searcher

logger = logging.getLogger(__name__)


@dataclass
class LoadedRun:
    run_dir: Path
    config: dict
    summary: dict
    curves: list[PassAtKCurve]

    @property
    def method(self) -> str:
        return self.summary["method"]

    @property
    def model(self) -> str:
        return self.summary["model"]

    @property
    def dataset_name(self) -> str:
        return self.summary["dataset"]

    def curve(self, *, filtered: bool = False) -> PassAtKCurve:
        for curve in self.curves:
            if curve.filtered == filtered:
                return curve
        raise KeyError(f"run {self.run_dir} has no {'filtered' if filtered else 'unfiltered'} curve")


def load_run(run_dir: str | Path) -> LoadedRun:
    run_dir = Path(run_dir)
    artifacts = RunArtifacts(run_dir=run_dir, completed=True)
    for path in (artifacts.config_path, artifacts.summary_path, artifacts.curves_path):
        if not path.exists():
            raise ConfigError(f"{run_dir} is not a finished run: missing {path.name}")
    return LoadedRun(
        run_dir=run_dir,
        config=json.loads(artifacts.config_path.read_text(encoding="utf-8")),
        summary=json.loads(artifacts.summary_path.read_text(encoding="utf-8")),
        curves=read_curves(artifacts.curves_path),
    )


def _fmt(value: float) -> str:
    return repr(float(value))


def summary_table(runs: list[LoadedRun]) -> tuple[list[str], list[list[str]]]:
    """Pivot runs into rows of model x dataset with method@k columns."""
    column_labels: list[str] = []
    for run in runs:
        for label in (f"{run.method}@1", f"{run.method}@{run.summary['k_max']}"):
            if label not in column_labels:
                column_labels.append(label)
    rows: dict[tuple[str, str], dict[str, str]] = {}
    for run in runs:
        key = (run.model, run.dataset_name)
        cells = rows.setdefault(key, {})
        cells[f"{run.method}@1"] = _fmt(run.summary["pass_at_1"])
        cells[f"{run.method}@{run.summary['k_max']}"] = _fmt(run.summary["pass_at_k_max"])
    header = ["model", "dataset", *column_labels]
    body = [
        [model, dataset, *[rows[(model, dataset)].get(label, "") for label in column_labels]]
        for model, dataset in sorted(rows)
    ]
    return header, body


def format_table(header: list[str], body: list[list[str]]) -> str:
    widths = [len(h) for h in header]
    for row in body:
        widths = [max(w, len(cell)) for w, cell in zip(widths, row)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    lines.extend(
        "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in body
    )
    return "\n".join(lines) + "\n"


def report(
    run_dirs: list[str | Path],
    out_dir: str | Path,
    *,
    relative: bool = True,
) -> dict[str, Path]:
    """Emit the cross-run report files; returns a name -> path map.

    The summary table always lands first, so a missing repeated-sampling
    baseline still leaves the table behind when this raises MissingBaseline.
    """
    runs = [load_run(d) for d in run_dirs]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    header, body = summary_table(runs)
    paths["summary_csv"] = out_dir / "summary_table.csv"
    with paths["summary_csv"].open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(body)
    paths["summary_txt"] = out_dir / "summary_table.txt"
    paths["summary_txt"].write_text(format_table(header, body), encoding="utf-8")

    paths["bars_csv"] = out_dir / "bars.csv"
    with paths["bars_csv"].open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["model", "dataset", "label", "value"])
        for run in runs:
            writer.writerow(
                [run.model, run.dataset_name, f"{run.method}@1", _fmt(run.summary["pass_at_1"])]
            )
            writer.writerow(
                [
                    run.model,
                    run.dataset_name,
                    f"{run.method}@{run.summary['k_max']}",
                    _fmt(run.summary["pass_at_k_max"]),
                ]
            )

    paths["normalized_csv"] = out_dir / "compute_normalized.csv"
    with paths["normalized_csv"].open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["model", "dataset", "method", "tokens", "value"])
        for run in runs:
            rate = run.summary.get("tokens_per_candidate")
            if not rate:
                logger.warning("run %s has no token rate; skipped", run.run_dir)
                continue
            normalized = compute_normalized_curve(run.curve(filtered=False), rate)
            for tokens, value in normalized.points:
                writer.writerow(
                    [run.model, run.dataset_name, run.method, _fmt(tokens), _fmt(value)]
                )

    caveats = sorted(
        {note for run in runs for note in run.summary.get("caveats", [])}
    )
    paths["report_json"] = out_dir / "report.json"
    paths["report_json"].write_text(
        json.dumps(
            {
                "runs": [
                    {
                        "run_dir": str(run.run_dir),
                        "method": run.method,
                        "model": run.model,
                        "dataset": run.dataset_name,
                        "pass_at_1": run.summary["pass_at_1"],
                        "pass_at_k_max": run.summary["pass_at_k_max"],
                        "k_max": run.summary["k_max"],
                        "caveats": run.summary.get("caveats", []),
                    }
                    for run in runs
                ],
                "caveats": caveats,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )

    if relative:
        baselines: dict[tuple[str, str], float] = {}
        for run in runs:
            if run.method == "repeated_sampling":
                baselines[(run.model, run.dataset_name)] = run.summary["pass_at_1"]
        missing = [
            run for run in runs if (run.model, run.dataset_name) not in baselines
        ]
        if missing:
            raise MissingBaseline(
                "relative curves need a repeated_sampling run for: "
                + ", ".join(f"{r.model}/{r.dataset_name}" for r in missing)
            )
        paths["relative_csv"] = out_dir / "relative_curves.csv"
        with paths["relative_csv"].open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["model", "dataset", "method", "k_or_tokens", "value", "filtered"])
            for run in runs:
                baseline = baselines[(run.model, run.dataset_name)]
                for curve in run.curves:
                    ratio = relative_improvement(curve, baseline)
                    for k, value in ratio.points:
                        writer.writerow(
                            [
                                run.model,
                                run.dataset_name,
                                run.method,
                                _fmt(k),
                                _fmt(value),
                                "1" if curve.filtered else "0",
                            ]
                        )
    return paths


# -- diversity over a finished run ------------------------------------------------


@dataclass
class DiversityRunReport:
    run_dir: Path
    scores: list[DiversityScore]
    dataset_diversity: float
    sampled: bool
    unparsable: int
    method: str
    model: str
    pass_at_1: float
    pass_at_k_max: float


def _judged_pool(
    problem_records: list[dict],
    searcher: Searcher,
    problem,
    *,
    max_pool: int,
    seed: int,
    word_budget: int,
) -> tuple[list[JudgedCode], bool]:
    coded = [r for r in problem_records if r["code"]]
    sampled = len(coded) > max_pool
    if sampled:
        coded = random.Random(seed).sample(coded, max_pool)
    pool = []
    for record in coded:
        try:
            idea = searcher.backtranslate(problem, record["code"], word_budget).text
        except SketchEmpty:
            idea = "(no idea available)"
        pool.append(JudgedCode(key=record["key"], code=record["code"], idea=idea))
    return pool, sampled


def diversity_for_run(
    run_dir: str | Path,
    *,
    provider: Provider | None = None,
    mock_script: str | None = None,
    max_pool: int = SUBSAMPLE_CAP,
    word_budget: int = 60,
) -> DiversityRunReport:
    """Backtranslate-then-judge every pair of a run's coded candidates.

    Writes diversity.csv and diversity.json into the run directory and
    returns the in-memory report.
    """
    run = load_run(run_dir)
    dataset = load_dataset(run.config["dataset"])
    if run.config.get("date_start"):
        import datetime as dt

        from .corpus import filter_by_date

        dataset = filter_by_date(
            dataset,
            dt.date.fromisoformat(run.config["date_start"]),
            dt.date.fromisoformat(run.config["date_end"]),
        )
    problems = {p.id: p for p in dataset.problems}

    settings = run.config["provider"]
    if mock_script is not None:
        settings = {"kind": "scripted", "script": mock_script}
    provider = provider or build_provider(
        ProviderSettings(
            kind=settings["kind"],
            script=settings.get("script"),
            base_url=settings.get("base_url", ""),
            api_key_env=settings.get("api_key_env", "PROVIDER_API_KEY"),
        )
    )
    gateway = Gateway(provider, cache_dir=Path(run_dir) / "cache")
    judge_model = run.config["judge_model"]
    prompts = PromptLibrary(run.config.get("prompts_dir"))
    searcher = Searcher(gateway, judge_model, SamplingParams(), prompts)
    judge = SimilarityJudge(gateway, judge_model, prompts=prompts)

    by_problem: dict[str, list[dict]] = {}
    for record in read_jsonl(Path(run_dir) / "candidates.jsonl"):
        by_problem.setdefault(record["problem_id"], []).append(record)

    seed = run.config.get("seed", 0)
    scores: list[DiversityScore] = []
    for problem_id in sorted(by_problem):
        problem = problems.get(problem_id)
        if problem is None:
            logger.warning("candidates reference unknown problem %s", problem_id)
            continue
        pool, sampled = _judged_pool(
            by_problem[problem_id],
            searcher,
            problem,
            max_pool=max_pool,
            seed=seed,
            word_budget=word_budget,
        )
        try:
            score = diversity_score(
                problem, pool, judge, max_pool=max_pool, seed=seed
            )
        except TooFewCandidates:
            logger.warning("problem %s has fewer than 2 coded candidates", problem_id)
            continue
        score.sampled = score.sampled or sampled
        scores.append(score)

    combined = combine_scores(scores)

    csv_path = Path(run_dir) / "diversity.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["problem_id", "diversity", "pool", "pairs", "similar", "sampled", "seed", "unparsable"]
        )
        for score in scores:
            writer.writerow(
                [
                    score.problem_id,
                    _fmt(score.value),
                    score.pool_size,
                    score.total_pairs,
                    score.similar_pairs,
                    "1" if score.sampled else "0",
                    score.seed,
                    score.unparsable,
                ]
            )

    result = DiversityRunReport(
        run_dir=Path(run_dir),
        scores=scores,
        dataset_diversity=combined.dataset_diversity,
        sampled=combined.sampled,
        unparsable=combined.unparsable,
        method=run.method,
        model=run.model,
        pass_at_1=run.summary["pass_at_1"],
        pass_at_k_max=run.summary["pass_at_k_max"],
    )
    (Path(run_dir) / "diversity.json").write_text(
        json.dumps(
            {
                "dataset_diversity": result.dataset_diversity,
                "method": result.method,
                "model": result.model,
                "pass_at_1": result.pass_at_1,
                "pass_at_k_max": result.pass_at_k_max,
                "sampled": result.sampled,
                "seed": seed,
                "unparsable_judgments": result.unparsable,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    return result


def gain_report_for_runs(
    reports: list[DiversityRunReport], out_dir: str | Path
) -> DiversityGainReport:
    """Correlate run diversity with pass@k gain and write the report files."""
    runs = [
        RunDiversity(
            method=r.method,
            model=r.model,
            diversity=r.dataset_diversity,
            pass_at_1=r.pass_at_1,
            pass_at_k=r.pass_at_k_max,
        )
        for r in reports
    ]
    report_ = diversity_gain_report(runs)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_gain_report(report_, out_dir / "diversity_gain.csv", out_dir / "diversity_gain.json")
    return report_
