"""Experiment configuration, end-to-end run driving, persistence, and sweeps.

A run directory is append-only JSONL plus derived files::

    run_dir/
      config.json       resolved config snapshot (guards resume against drift)
      candidates.jsonl  one record per generated candidate
      verdicts.jsonl    one record per judged candidate
      stats.jsonl       one record per finished problem
      progress.jsonl    completion markers, written last per problem
      curves.csv        pass@k curves (written when the run completes)
      summary.json      run totals (written when the run completes)
      run.log           plain progress log
      cache/            content-addressed provider responses

Records carry idempotent keys, so re-running with the same directory skips
completed work and reproduces byte-identical artifacts.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from .corpus import Dataset, Problem, filter_by_date, load_dataset
from .errors import ConfigError, SketchEmpty
from .executor import (
    CannedSandbox,
    ExecutionLimits,
    SandboxBackend,
    ShimBackend,
    Verdict,
    run_candidates,
)
from .gateway import Gateway, OpenAIChatProvider, Provider, SamplingParams, ScriptedProvider
from .metrics import (
    ESTIMATOR_CAVEAT,
    PassAtKCurve,
    ProblemStats,
    build_curve,
    conditional_solve_rates,
    write_curves_csv,
)
from .prompts import PromptLibrary
from .search import PlanSearchConfig, Searcher, SolutionCandidate

logger = logging.getLogger(__name__)

METHODS = (
    "repeated_sampling",
    "cot",
    "idea_search",
    "plansearch",
    "backtranslation",
    "conditioning",
)

SWEEPABLE = ("temperature", "top_p", "word_budget", "n")


@dataclass(frozen=True)
class ProviderSettings:
    kind: str = "scripted"  # scripted | openai
    script: str | None = None
    base_url: str = ""
    api_key_env: str = "PROVIDER_API_KEY"


@dataclass(frozen=True)
class SandboxSettings:
    kind: str = "canned"  # canned | shim
    rules: str | None = None
    command: tuple[str, ...] = ()


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    method: str
    run_dir: str
    model: str = "mock-model"
    judge_model: str = "mock-judge"
    date_start: dt.date | None = None
    date_end: dt.date | None = None
    temperature: float = 0.9
    top_p: float = 0.95
    max_tokens: int = 4096
    n: int = 5
    plansearch: PlanSearchConfig = PlanSearchConfig()
    limits: ExecutionLimits = ExecutionLimits()
    provider: ProviderSettings = ProviderSettings()
    sandbox: SandboxSettings = SandboxSettings()
    provider_concurrency: int = 4
    sandbox_workers: int = 4
    max_attempts: int = 3
    k_max: int = 200
    filtered_k_max: int = 20
    filtering: bool = True
    token_budget: int | None = None
    seed: int = 0
    word_budget: int = 100
    solutions_pool: str | None = None
    conditioning_sketches: int = 5
    conditioning_samples: int = 25
    detail_verdicts: bool = False
    prompts_dir: str | None = None
    sanitize: tuple[str, ...] = ()
    cache_dir: str | None = None

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; pick one of {METHODS}")
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.k_max < 1 or self.filtered_k_max < 1:
            raise ConfigError("k grids must start at 1")
        if self.provider_concurrency < 1 or self.sandbox_workers < 1:
            raise ConfigError("concurrency limits must be >= 1")
        if (self.date_start is None) != (self.date_end is None):
            raise ConfigError("date_start and date_end must be set together")
        if self.method == "backtranslation" and not self.solutions_pool:
            raise ConfigError("backtranslation needs a solutions_pool file")
        if self.provider.kind not in ("scripted", "openai"):
            raise ConfigError(f"unknown provider kind {self.provider.kind!r}")
        if self.provider.kind == "scripted" and not self.provider.script:
            raise ConfigError("scripted provider needs a script file")
        if self.provider.kind == "openai" and not self.provider.base_url:
            raise ConfigError("openai provider needs a base_url")
        if self.sandbox.kind not in ("canned", "shim"):
            raise ConfigError(f"unknown sandbox kind {self.sandbox.kind!r}")
        if self.sandbox.kind == "canned" and not self.sandbox.rules:
            raise ConfigError("canned sandbox needs a rules file")
        if self.sandbox.kind == "shim" and not self.sandbox.command:
            raise ConfigError("shim sandbox needs a command")

    def sampling_params(self) -> SamplingParams:
        return SamplingParams(
            temperature=self.temperature, top_p=self.top_p, max_tokens=self.max_tokens
        )

    def snapshot(self) -> dict:
        """Everything that determines outputs; run/cache locations excluded."""
        return {
            "dataset": self.dataset,
            "method": self.method,
            "model": self.model,
            "judge_model": self.judge_model,
            "date_start": self.date_start.isoformat() if self.date_start else None,
            "date_end": self.date_end.isoformat() if self.date_end else None,
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_tokens": self.max_tokens,
            "n": self.n,
            "plansearch": {
                "max_subset_size": self.plansearch.max_subset_size,
                "depth": self.plansearch.depth,
                "via_pseudocode": self.plansearch.via_pseudocode,
            },
            "limits": {
                "wall_time": self.limits.wall_time,
                "memory": self.limits.memory,
                "output_cap": self.limits.output_cap,
            },
            "provider": {
                "kind": self.provider.kind,
                "script": self.provider.script,
                "base_url": self.provider.base_url,
                "api_key_env": self.provider.api_key_env,
            },
            "sandbox": {
                "kind": self.sandbox.kind,
                "rules": self.sandbox.rules,
                "command": list(self.sandbox.command),
            },
            "k_max": self.k_max,
            "filtered_k_max": self.filtered_k_max,
            "filtering": self.filtering,
            "token_budget": self.token_budget,
            "seed": self.seed,
            "word_budget": self.word_budget,
            "solutions_pool": self.solutions_pool,
            "conditioning_sketches": self.conditioning_sketches,
            "conditioning_samples": self.conditioning_samples,
            "detail_verdicts": self.detail_verdicts,
            "prompts_dir": self.prompts_dir,
            "sanitize": list(self.sanitize),
        }


def _resolve(base: Path, value: str | None) -> str | None:
    if value is None:
        return None
    path = Path(value)
    return str(path if path.is_absolute() else (base / path))


def load_config(
    path: str | Path,
    *,
    run_dir: str | None = None,
    mock_script: str | None = None,
) -> ExperimentConfig:
    """Read a declarative JSON config; relative paths resolve next to it."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config top level must be an object")
    base = path.parent

    known = {
        "dataset",
        "method",
        "run_dir",
        "model",
        "judge_model",
        "date_start",
        "date_end",
        "temperature",
        "top_p",
        "max_tokens",
        "n",
        "plansearch",
        "limits",
        "provider",
        "sandbox",
        "provider_concurrency",
        "sandbox_workers",
        "max_attempts",
        "k_max",
        "filtered_k_max",
        "filtering",
        "token_budget",
        "seed",
        "word_budget",
        "solutions_pool",
        "conditioning_sketches",
        "conditioning_samples",
        "detail_verdicts",
        "prompts_dir",
        "sanitize",
        "cache_dir",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    kwargs: dict = {}
    for key in (
        "method",
        "model",
        "judge_model",
        "temperature",
        "top_p",
        "max_tokens",
        "n",
        "provider_concurrency",
        "sandbox_workers",
        "max_attempts",
        "k_max",
        "filtered_k_max",
        "filtering",
        "token_budget",
        "seed",
        "word_budget",
        "conditioning_sketches",
        "conditioning_samples",
        "detail_verdicts",
    ):
        if key in raw:
            kwargs[key] = raw[key]

    if "dataset" not in raw:
        raise ConfigError("config needs a 'dataset' path")
    kwargs["dataset"] = _resolve(base, raw["dataset"])
    kwargs["solutions_pool"] = _resolve(base, raw.get("solutions_pool"))
    kwargs["prompts_dir"] = _resolve(base, raw.get("prompts_dir"))
    kwargs["cache_dir"] = _resolve(base, raw.get("cache_dir"))
    kwargs["sanitize"] = tuple(raw.get("sanitize", ()))

    for key in ("date_start", "date_end"):
        if raw.get(key) is not None:
            try:
                kwargs[key] = dt.date.fromisoformat(raw[key])
            except ValueError as exc:
                raise ConfigError(f"bad {key}: {raw[key]!r}") from exc

    ps = raw.get("plansearch", {})
    try:
        kwargs["plansearch"] = PlanSearchConfig(
            max_subset_size=int(ps.get("max_subset_size", ps.get("S", 2))),
            depth=int(ps.get("depth", ps.get("L", 2))),
            via_pseudocode=bool(ps.get("via_pseudocode", True)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad plansearch settings: {exc}") from exc

    lim = raw.get("limits", {})
    try:
        kwargs["limits"] = ExecutionLimits(
            wall_time=float(lim.get("wall_time", 10.0)),
            memory=int(lim.get("memory", 1 << 30)),
            output_cap=int(lim.get("output_cap", 16 << 20)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad execution limits: {exc}") from exc

    prov = dict(raw.get("provider", {}))
    if mock_script is not None:
        prov = {"kind": "scripted", "script": mock_script}
    kwargs["provider"] = ProviderSettings(
        kind=prov.get("kind", "scripted"),
        script=_resolve(base, prov.get("script")),
        base_url=prov.get("base_url", ""),
        api_key_env=prov.get("api_key_env", "PROVIDER_API_KEY"),
    )

    sand = raw.get("sandbox", {})
    kwargs["sandbox"] = SandboxSettings(
        kind=sand.get("kind", "canned"),
        rules=_resolve(base, sand.get("rules")),
        command=tuple(sand.get("command", ())),
    )

    chosen_run_dir = run_dir or raw.get("run_dir")
    if not chosen_run_dir:
        raise ConfigError("a run directory is required (config run_dir or --run-dir)")
    kwargs["run_dir"] = _resolve(base, chosen_run_dir) if run_dir is None else run_dir

    try:
        return ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config: {exc}") from exc


# -- persistence ----------------------------------------------------------------


def dump_line(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def read_jsonl(path: Path, *, repair: bool = False) -> list[dict]:
    """Read a JSONL file; with `repair`, truncate a torn trailing line.

    The writers always emit complete ``record\\n`` lines, so anything after
    the last parsable newline-terminated line is the debris of a crash.
    """
    if not path.exists():
        return []
    text = path.read_text(encoding="utf-8")
    segments = text.split("\n")
    complete, tail = segments[:-1], segments[-1]
    records: list[dict] = []
    valid_chars = 0
    torn = bool(tail)
    for line in complete:
        if not line:
            valid_chars += 1
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError:
            torn = True
            break
        valid_chars += len(line) + 1
    if torn and repair:
        logger.warning("dropping torn trailing data in %s", path)
        path.write_text(text[:valid_chars], encoding="utf-8")
    return records


class _Appender:
    """Append-only JSONL writer that skips records whose key already exists."""

    def __init__(self, path: Path, key_field: str) -> None:
        self.path = path
        self.key_field = key_field
        self.seen: set[str] = set()
        for record in read_jsonl(path, repair=True):
            self.seen.add(record[key_field])

    def append(self, record: dict) -> bool:
        key = record[self.key_field]
        if key in self.seen:
            return False
        with self.path.open("a", encoding="utf-8") as handle:
            handle.write(dump_line(record) + "\n")
        self.seen.add(key)
        return True


def candidate_record(candidate: SolutionCandidate, extra: dict | None = None) -> dict:
    record = {
        "key": candidate.key,
        "problem_id": candidate.problem_id,
        "method": candidate.method,
        "sample_index": candidate.sample_index,
        "format_ok": candidate.format_ok,
        "code": candidate.code,
        "tokens_out_total": candidate.tokens_out_total,
        "sketch": candidate.sketch.text if candidate.sketch else None,
        "sketch_origin": candidate.sketch.origin if candidate.sketch else None,
        "sketch_flags": list(candidate.sketch.flags) if candidate.sketch else [],
        "combo_path": (
            [[m.text for m in combo.members] for combo in candidate.combo_path]
            if candidate.combo_path is not None
            else None
        ),
    }
    if extra:
        record.update(extra)
    return record


def verdict_record(problem_id: str, verdict: Verdict) -> dict:
    return {
        "key": verdict.candidate_key,
        "problem_id": problem_id,
        "passed_public": verdict.passed_public,
        "passed_all": verdict.passed_all,
        "format_error": verdict.format_error,
        "per_test": [
            {"status": t.status, "runtime": t.runtime, "stderr": t.stderr_excerpt}
            for t in verdict.per_test
        ],
    }


def stats_record(stats: ProblemStats) -> dict:
    return {
        "problem_id": stats.problem_id,
        "n": stats.n,
        "c": stats.c,
        "n_filtered": stats.n_filtered,
        "c_filtered": stats.c_filtered,
        "tokens_out_total": stats.tokens_out_total,
    }


def stats_from_record(record: dict) -> ProblemStats:
    return ProblemStats(
        problem_id=record["problem_id"],
        n=record["n"],
        c=record["c"],
        n_filtered=record["n_filtered"],
        c_filtered=record["c_filtered"],
        tokens_out_total=record["tokens_out_total"],
    )


@dataclass
class RunArtifacts:
    run_dir: Path
    completed: bool

    @property
    def config_path(self) -> Path:
        return self.run_dir / "config.json"

    @property
    def candidates_path(self) -> Path:
        return self.run_dir / "candidates.jsonl"

    @property
    def verdicts_path(self) -> Path:
        return self.run_dir / "verdicts.jsonl"

    @property
    def stats_path(self) -> Path:
        return self.run_dir / "stats.jsonl"

    @property
    def progress_path(self) -> Path:
        return self.run_dir / "progress.jsonl"

    @property
    def curves_path(self) -> Path:
        return self.run_dir / "curves.csv"

    @property
    def summary_path(self) -> Path:
        return self.run_dir / "summary.json"

    @property
    def conditioning_path(self) -> Path:
        return self.run_dir / "conditioning.json"

    @property
    def log_path(self) -> Path:
        return self.run_dir / "run.log"


# -- provider / sandbox construction ---------------------------------------------


def build_provider(settings: ProviderSettings) -> Provider:
    if settings.kind == "scripted":
        return ScriptedProvider.from_json(settings.script)
    return OpenAIChatProvider(settings.base_url, api_key_env=settings.api_key_env)


def build_sandbox(settings: SandboxSettings) -> SandboxBackend:
    if settings.kind == "canned":
        return CannedSandbox.from_json(settings.rules)
    return ShimBackend(settings.command)


def load_solutions_pool(path: str | Path) -> dict[str, list[str]]:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(obj, dict):
        raise ConfigError("solutions pool must map problem ids to lists of programs")
    pool: dict[str, list[str]] = {}
    for problem_id, codes in obj.items():
        if not isinstance(codes, list) or not all(isinstance(c, str) for c in codes):
            raise ConfigError(f"solutions pool entry {problem_id!r} must be a list of strings")
        pool[problem_id] = codes
    return pool


# -- generation dispatch ----------------------------------------------------------


def _generate(
    searcher: Searcher,
    problem: Problem,
    config: ExperimentConfig,
    pool: dict[str, list[str]] | None,
) -> tuple[list[SolutionCandidate], dict[str, dict]]:
    """Produce candidates for one problem; extras carry per-record additions."""
    method = config.method
    if method == "repeated_sampling":
        return searcher.repeated_sampling(problem, config.n), {}
    if method == "cot":
        return searcher.chain_of_thought(problem, config.n), {}
    if method == "idea_search":
        return searcher.idea_search(problem, config.n), {}
    if method == "plansearch":
        return searcher.plan_search(problem, config.plansearch), {}
    if method == "backtranslation":
        codes = (pool or {}).get(problem.id, [])
        if not codes:
            logger.warning("no pooled solution for %s; skipping", problem.id)
            return [], {}
        try:
            sketch = searcher.backtranslate(problem, codes[0], config.word_budget)
        except SketchEmpty as exc:
            logger.warning("%s", exc)
            return [], {}
        candidates = []
        for i in range(config.n):
            candidate = searcher.implement_from_sketch(
                problem, sketch, i, method="backtranslation"
            )
            candidates.append(candidate)
        return candidates, {}
    if method == "conditioning":
        candidates = []
        extras: dict[str, dict] = {}
        index = 0
        for si in range(config.conditioning_sketches):
            try:
                sketch = searcher.generate_sketch(problem, si)
            except SketchEmpty as exc:
                logger.warning("conditioning sketch %d for %s failed: %s", si, problem.id, exc)
                continue
            for j in range(config.conditioning_samples):
                candidate = searcher.implement_from_sketch(
                    problem, sketch, j, method="conditioning"
                )
                candidate.sample_index = index
                extras[candidate.key] = {"sketch_group": f"s{si}"}
                index += 1
                candidates.append(candidate)
        return candidates, extras
    raise ConfigError(f"unknown method {method!r}")


# -- the run itself ----------------------------------------------------------------


def _stats_for_problem(
    problem_id: str,
    candidates: Sequence[dict],
    verdicts: Sequence[dict],
) -> ProblemStats:
    by_key = {v["key"]: v for v in verdicts}
    n = len(candidates)
    c = 0
    n_filtered = 0
    for record in candidates:
        verdict = by_key[record["key"]]
        c += verdict["passed_all"]
        n_filtered += verdict["passed_public"]
    return ProblemStats(
        problem_id=problem_id,
        n=n,
        c=c,
        n_filtered=n_filtered,
        c_filtered=c,  # passing everything implies passing the public subset
        tokens_out_total=sum(r["tokens_out_total"] for r in candidates),
    )


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def _json_text(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def run_experiment(
    config: ExperimentConfig,
    *,
    provider: Provider | None = None,
    sandbox: SandboxBackend | None = None,
    stop_after: int | None = None,
) -> RunArtifacts:
    """Drive one experiment end to end; safe to re-run in the same directory.

    `stop_after` bounds how many *incomplete* problems this invocation will
    process, which slices long runs into budgeted chunks and is also how the
    test suite exercises crash-safe resume.
    """
    run_dir = Path(config.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    artifacts = RunArtifacts(run_dir=run_dir, completed=False)

    snapshot_text = _json_text(config.snapshot())
    if artifacts.config_path.exists():
        if artifacts.config_path.read_text(encoding="utf-8") != snapshot_text:
            raise ConfigError(
                f"{artifacts.config_path} holds a different config; "
                "refusing to mix experiments in one run directory"
            )
    else:
        artifacts.config_path.write_text(snapshot_text, encoding="utf-8")

    handler = logging.FileHandler(artifacts.log_path, encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    package_logger = logging.getLogger(__package__)
    package_logger.addHandler(handler)
    try:
        return _run_locked(config, artifacts, provider, sandbox, stop_after)
    finally:
        package_logger.removeHandler(handler)
        handler.close()


def _run_locked(
    config: ExperimentConfig,
    artifacts: RunArtifacts,
    provider: Provider | None,
    sandbox: SandboxBackend | None,
    stop_after: int | None,
) -> RunArtifacts:
    dataset = load_dataset(config.dataset)
    if config.date_start is not None and config.date_end is not None:
        dataset = filter_by_date(dataset, config.date_start, config.date_end)

    provider = provider or build_provider(config.provider)
    sandbox = sandbox or build_sandbox(config.sandbox)
    cache_dir = Path(config.cache_dir) if config.cache_dir else artifacts.run_dir / "cache"
    gateway = Gateway(
        provider,
        cache_dir=cache_dir,
        max_attempts=config.max_attempts,
        token_budget=config.token_budget,
        sanitize=config.sanitize,
    )
    prompts = PromptLibrary(config.prompts_dir)
    searcher = Searcher(
        gateway,
        config.model,
        config.sampling_params(),
        prompts,
        batch_limit=config.provider_concurrency,
    )
    pool = load_solutions_pool(config.solutions_pool) if config.solutions_pool else None

    candidates_log = _Appender(artifacts.candidates_path, "key")
    verdicts_log = _Appender(artifacts.verdicts_path, "key")
    stats_log = _Appender(artifacts.stats_path, "problem_id")
    progress_log = _Appender(artifacts.progress_path, "problem_id")

    processed_now = 0
    stopped_early = False
    for problem in dataset.problems:
        if problem.id in progress_log.seen:
            logger.info("skipping completed problem %s", problem.id)
            continue
        if stop_after is not None and processed_now >= stop_after:
            stopped_early = True
            break

        logger.info("problem %s: generating (%s)", problem.id, config.method)
        candidates, extras = _generate(searcher, problem, config, pool)
        logger.info("problem %s: judging %d candidate(s)", problem.id, len(candidates))
        verdicts = run_candidates(
            candidates,
            problem,
            sandbox,
            config.limits,
            detail=config.detail_verdicts,
            workers=config.sandbox_workers,
        )

        candidate_records = [
            candidate_record(c, extras.get(c.key)) for c in candidates
        ]
        verdict_records = [verdict_record(problem.id, v) for v in verdicts]
        for record in candidate_records:
            candidates_log.append(record)
        for record in verdict_records:
            verdicts_log.append(record)
        stats_log.append(
            stats_record(_stats_for_problem(problem.id, candidate_records, verdict_records))
        )
        progress_log.append({"problem_id": problem.id})
        processed_now += 1

    if stopped_early:
        logger.info("stopping after %d problem(s); rerun to resume", processed_now)
        return artifacts

    _finalize(config, artifacts, dataset)
    artifacts.completed = True
    return artifacts


def _finalize(config: ExperimentConfig, artifacts: RunArtifacts, dataset: Dataset) -> None:
    stats = [stats_from_record(r) for r in read_jsonl(artifacts.stats_path)]
    if len(stats) != len(dataset.problems):
        raise ConfigError(
            f"run finished with {len(stats)} stats records for "
            f"{len(dataset.problems)} problems; run directory is inconsistent"
        )

    curves = [build_curve(config.method, stats, range(1, config.k_max + 1))]
    if config.filtering:
        filtered_top = min(config.filtered_k_max, config.k_max)
        curves.append(
            build_curve(config.method, stats, range(1, filtered_top + 1), filtered=True)
        )
    write_curves_csv(curves, artifacts.curves_path)

    total_candidates = sum(s.n for s in stats)
    total_tokens = sum(s.tokens_out_total for s in stats)
    summary = {
        "method": config.method,
        "model": config.model,
        "dataset": dataset.name,
        "problems": len(stats),
        "candidates": total_candidates,
        "passed_all": sum(s.c for s in stats),
        "passed_public": sum(s.n_filtered for s in stats),
        "tokens_out_total": total_tokens,
        "tokens_per_candidate": (
            total_tokens / total_candidates if total_candidates else None
        ),
        "k_max": config.k_max,
        "pass_at_1": curves[0].value_at(1),
        "pass_at_k_max": curves[0].value_at(config.k_max),
        "caveats": [ESTIMATOR_CAVEAT] if config.method == "plansearch" else [],
    }
    _write_atomic(artifacts.summary_path, _json_text(summary))

    if config.method == "conditioning":
        _write_conditioning_report(artifacts)

    logger.info(
        "run complete: %d problems, %d candidates, pass@1=%.4f",
        len(stats),
        total_candidates,
        summary["pass_at_1"],
    )


def _write_conditioning_report(artifacts: RunArtifacts) -> None:
    candidates = read_jsonl(artifacts.candidates_path)
    verdicts = {v["key"]: v for v in read_jsonl(artifacts.verdicts_path)}
    records = [
        (r["problem_id"], r["sketch_group"], bool(verdicts[r["key"]]["passed_all"]))
        for r in candidates
        if "sketch_group" in r
    ]
    if not records:
        _write_atomic(
            artifacts.conditioning_path,
            _json_text({"note": "no conditioning records", "excluded_problems": []}),
        )
        return

    # Problems the model solves at exactly 0% or 100% overall carry no signal
    # for the conditioning comparison; drop them before grouping.
    by_problem: dict[str, list[bool]] = {}
    for problem_id, _group, passed in records:
        by_problem.setdefault(problem_id, []).append(passed)
    excluded = {
        pid
        for pid, outcomes in by_problem.items()
        if sum(outcomes) in (0, len(outcomes))
    }
    kept = [r for r in records if r[0] not in excluded]
    if not kept:
        _write_atomic(
            artifacts.conditioning_path,
            _json_text(
                {
                    "note": "every problem solved at 0% or 100%; nothing to report",
                    "excluded_problems": sorted(excluded),
                }
            ),
        )
        return

    report = conditional_solve_rates(kept)
    _write_atomic(
        artifacts.conditioning_path,
        _json_text(
            {
                "excluded_problems": sorted(excluded),
                "polarization": report.polarization,
                "per_sketch": [
                    {
                        "problem_id": g.problem_id,
                        "sketch": g.group_id,
                        "n": g.n,
                        "c": g.c,
                        "rate": g.rate,
                    }
                    for g in report.per_sketch
                ],
                "per_problem": [
                    {"problem_id": g.problem_id, "n": g.n, "c": g.c, "rate": g.rate}
                    for g in report.per_problem
                ],
            }
        ),
    )


# -- sweeps -------------------------------------------------------------------------


def run_sweep(
    config: ExperimentConfig,
    param: str,
    values: Sequence[float],
    sweep_dir: str | Path,
    *,
    provider: Provider | None = None,
    sandbox: SandboxBackend | None = None,
) -> list[RunArtifacts]:
    """One child run per grid value, sharing a provider cache."""
    if param not in SWEEPABLE:
        raise ConfigError(f"cannot sweep {param!r}; pick one of {SWEEPABLE}")
    if not values:
        raise ConfigError("sweep needs at least one grid value")
    deduped: list[float] = []
    for value in values:
        if value in deduped:
            logger.warning("duplicate sweep value %s dropped", value)
            continue
        deduped.append(value)

    sweep_dir = Path(sweep_dir)
    sweep_dir.mkdir(parents=True, exist_ok=True)
    shared_cache = sweep_dir / "cache"

    results = []
    rows: list[tuple[float, PassAtKCurve]] = []
    for value in deduped:
        child_dir = sweep_dir / f"{param}_{value:g}"
        cast = int(value) if param == "n" else float(value)
        child = replace(
            config,
            run_dir=str(child_dir),
            cache_dir=str(shared_cache),
            **{param: cast},
        )
        try:
            artifacts = run_experiment(child, provider=provider, sandbox=sandbox)
        except Exception as exc:  # noqa: BLE001 - child runs are isolated
            logger.error("sweep point %s=%s failed: %s", param, value, exc)
            continue
        results.append(artifacts)
        for curve in read_curves(artifacts.curves_path):
            rows.append((value, curve))

    lines = ["param,param_value,method,k_or_tokens,value,filtered"]
    for value, curve in rows:
        for k, v in curve.points:
            lines.append(
                f"{param},{value:g},{curve.label},{k!r},{v!r},{1 if curve.filtered else 0}"
            )
    _write_atomic(sweep_dir / "sweep.csv", "\n".join(lines) + "\n")
    return results


def read_curves(path: str | Path) -> list[PassAtKCurve]:
    """Parse a curves.csv back into curve objects (grouped by label+filtered)."""
    import csv as _csv

    grouped: dict[tuple[str, bool], list[tuple[float, float]]] = {}
    order: list[tuple[str, bool]] = []
    with Path(path).open(newline="", encoding="utf-8") as handle:
        for row in _csv.DictReader(handle):
            group = (row["method"], row["filtered"] == "1")
            if group not in grouped:
                grouped[group] = []
                order.append(group)
            grouped[group].append((float(row["k_or_tokens"]), float(row["value"])))
    return [
        PassAtKCurve(label=label, points=tuple(points), filtered=filtered)
        for (label, filtered), points in ((g, grouped[g]) for g in order)
    ]
