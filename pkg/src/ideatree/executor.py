"""Candidate judging: sandboxed execution against tests and public filtering.

Execution is delegated to a backend speaking the sandbox wire protocol (one
JSON job in, one JSON result out), so this module tests fully against the
canned fake below and runs for real against the external shim executable.
"""

from __future__ import annotations

import json
import logging
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

from .corpus import Problem
from .errors import SandboxUnavailable
from .search import SolutionCandidate

logger = logging.getLogger(__name__)

WIRE_VERSION = 1

JOB_STATUSES = ("ok", "timeout", "runtime_error", "output_overflow")
TEST_STATUSES = ("pass", "wrong_output", "timeout", "runtime_error", "output_overflow")

# Padding added to the subprocess-level timeout so the shim's own kill
# machinery (wall_time + 2s grace) always fires first.
_SHIM_EXTRA_TIMEOUT = 10.0


@dataclass(frozen=True)
class ExecutionLimits:
    wall_time: float = 10.0
    memory: int = 1 << 30
    output_cap: int = 16 << 20

    def __post_init__(self) -> None:
        if self.wall_time <= 0 or self.memory <= 0 or self.output_cap <= 0:
            raise ValueError("all execution limits must be positive")


@dataclass(frozen=True)
class SandboxResult:
    """One job's outcome as reported over the wire."""

    status: str
    stdout: str
    stderr: str
    runtime: float
    memory_enforced: bool = True


class SandboxBackend(Protocol):
    def run_job(self, source: str, stdin_data: str, limits: ExecutionLimits) -> SandboxResult: ...


class ShimBackend:
    """Runs each job through the external shim: `shim run` JSON in, JSON out."""

    def __init__(self, command: Sequence[str]) -> None:
        if not command:
            raise ValueError("shim command must be nonempty")
        self.command = tuple(command)

    def run_job(self, source: str, stdin_data: str, limits: ExecutionLimits) -> SandboxResult:
        spec = json.dumps(
            {
                "v": WIRE_VERSION,
                "source": source,
                "stdin_data": stdin_data,
                "wall_time": limits.wall_time,
                "memory": limits.memory,
                "output_cap": limits.output_cap,
            }
        )
        try:
            proc = subprocess.run(
                list(self.command),
                input=spec,
                capture_output=True,
                text=True,
                timeout=limits.wall_time + _SHIM_EXTRA_TIMEOUT,
            )
        except FileNotFoundError as exc:
            raise SandboxUnavailable(f"shim executable not found: {self.command[0]}") from exc
        except subprocess.TimeoutExpired as exc:
            raise SandboxUnavailable(f"shim hung past its own kill deadline: {exc}") from exc
        if proc.returncode != 0:
            raise SandboxUnavailable(
                f"shim exited {proc.returncode}: {proc.stderr.strip()[:500]}"
            )
        try:
            obj = json.loads(proc.stdout)
            status = obj["status"]
            if status not in JOB_STATUSES:
                raise ValueError(f"unknown status {status!r}")
            return SandboxResult(
                status=status,
                stdout=obj["stdout"],
                stderr=obj["stderr"],
                runtime=float(obj["runtime"]),
                memory_enforced=bool(obj.get("memory_enforced", True)),
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise SandboxUnavailable(f"shim spoke bad protocol: {exc}") from exc


@dataclass(frozen=True)
class CannedRule:
    """Matches a job on source/stdin content and replays a fixed result."""

    source_contains: str = ""
    stdin: str | None = None
    status: str = "ok"
    stdout: str = ""
    stderr: str = ""
    runtime: float = 0.0

    def matches(self, source: str, stdin_data: str) -> bool:
        if self.source_contains and self.source_contains not in source:
            return False
        if self.stdin is not None and self.stdin != stdin_data:
            return False
        return True


class CannedSandbox:
    """Fake backend replaying canned results; the primary suite runs on this."""

    def __init__(self, rules: Sequence[CannedRule], default: SandboxResult | None = None) -> None:
        self.rules = tuple(rules)
        self.default = default or SandboxResult(
            status="runtime_error",
            stdout="",
            stderr="no canned rule matched",
            runtime=0.0,
        )
        self.jobs_run = 0

    @classmethod
    def from_json(cls, source: str | Path | dict) -> "CannedSandbox":
        if isinstance(source, (str, Path)):
            obj = json.loads(Path(source).read_text(encoding="utf-8"))
        else:
            obj = source
        rules = [
            CannedRule(
                source_contains=raw.get("source_contains", ""),
                stdin=raw.get("stdin"),
                status=raw.get("status", "ok"),
                stdout=raw.get("stdout", ""),
                stderr=raw.get("stderr", ""),
                runtime=float(raw.get("runtime", 0.0)),
            )
            for raw in obj.get("rules", [])
        ]
        return cls(rules)

    def run_job(self, source: str, stdin_data: str, limits: ExecutionLimits) -> SandboxResult:
        self.jobs_run += 1
        for rule in self.rules:
            if rule.matches(source, stdin_data):
                return SandboxResult(
                    status=rule.status,
                    stdout=rule.stdout,
                    stderr=rule.stderr,
                    runtime=rule.runtime,
                )
        return self.default


@dataclass(frozen=True)
class TestOutcome:
    status: str
    runtime: float
    stderr_excerpt: str = ""


@dataclass
class Verdict:
    """Per-test outcomes for one candidate, public tests first.

    A candidate that never produced code gets an all-fail verdict without
    execution, marked with `format_error`. When `detail` was off, `per_test`
    may stop at the first private-test failure.
    """

    candidate_key: str
    per_test: list[TestOutcome] = field(default_factory=list)
    passed_public: bool = False
    passed_all: bool = False
    format_error: bool = False


def normalize_output(text: str) -> str:
    """Judging normalization: strip per-line trailing whitespace and trailing blank lines."""
    lines = [line.rstrip() for line in text.split("\n")]
    while lines and not lines[-1]:
        lines.pop()
    return "\n".join(lines)


def _outcome(result: SandboxResult, expected_output: str) -> TestOutcome:
    if result.status == "ok":
        if normalize_output(result.stdout) == normalize_output(expected_output):
            status = "pass"
        else:
            status = "wrong_output"
    else:
        status = result.status
    return TestOutcome(
        status=status,
        runtime=result.runtime,
        stderr_excerpt=result.stderr[:500],
    )


def effective_limits(problem: Problem, limits: ExecutionLimits) -> ExecutionLimits:
    if problem.time_limit_override is None:
        return limits
    return ExecutionLimits(
        wall_time=problem.time_limit_override,
        memory=limits.memory,
        output_cap=limits.output_cap,
    )


def run_candidate(
    candidate: SolutionCandidate,
    problem: Problem,
    backend: SandboxBackend,
    limits: ExecutionLimits | None = None,
    *,
    detail: bool = False,
) -> Verdict:
    """Judge one candidate against all tests of a problem.

    Public tests always run in full (filtering needs them); without `detail`
    the private section stops at its first failure, and is skipped entirely
    when the public section already failed.
    """
    if not candidate.format_ok or candidate.code is None:
        return Verdict(candidate_key=candidate.key, format_error=True)
    limits = effective_limits(problem, limits or ExecutionLimits())

    outcomes: list[TestOutcome] = []
    public_ok = True
    for test in problem.public_tests:
        outcome = _outcome(backend.run_job(candidate.code, test.input, limits), test.expected_output)
        outcomes.append(outcome)
        if outcome.status != "pass":
            public_ok = False

    all_ok = public_ok
    if public_ok or detail:
        for test in problem.private_tests:
            outcome = _outcome(
                backend.run_job(candidate.code, test.input, limits), test.expected_output
            )
            outcomes.append(outcome)
            if outcome.status != "pass":
                all_ok = False
                if not detail:
                    break

    return Verdict(
        candidate_key=candidate.key,
        per_test=outcomes,
        passed_public=public_ok,
        passed_all=all_ok,
    )


def run_candidates(
    candidates: Sequence[SolutionCandidate],
    problem: Problem,
    backend: SandboxBackend,
    limits: ExecutionLimits | None = None,
    *,
    detail: bool = False,
    workers: int = 4,
) -> list[Verdict]:
    """Judge many candidates in parallel; verdicts align with the input order."""
    if workers < 1:
        raise ValueError("workers must be >= 1")

    def one(candidate: SolutionCandidate) -> Verdict:
        return run_candidate(candidate, problem, backend, limits, detail=detail)

    if len(candidates) <= 1 or workers == 1:
        return [one(c) for c in candidates]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, candidates))


@dataclass
class FilteredPool:
    """Candidates surviving public tests, plus the shrunken (n', c') counts."""

    items: list[tuple[SolutionCandidate, Verdict]]
    n_filtered: int
    c_filtered: int


def filter_public(
    candidates_with_verdicts: Sequence[tuple[SolutionCandidate, Verdict]],
) -> FilteredPool:
    """Keep exactly the candidates whose verdicts passed all public tests."""
    items = [(c, v) for c, v in candidates_with_verdicts if v.passed_public]
    c_filtered = sum(1 for _c, v in items if v.passed_all)
    return FilteredPool(items=items, n_filtered=len(items), c_filtered=c_filtered)
