"""Benchmark problem sets: canonical JSON loading, validation, date windowing.

The on-disk format is a single JSON file::

    {
      "name": "toy",
      "problems": [
        {
          "id": "p1",
          "statement": "...",
          "release_date": "2024-05-01",        # optional
          "time_limit_override": 4.0,          # optional, seconds
          "public_tests":  [{"input": "...", "output": "..."}],
          "private_tests": [{"input": "...", "output": "..."}]
        }
      ]
    }

Problems are stdin/stdout only; converting assertion-style suites into this
shape is dataset preparation, not this module's job.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .errors import EmptyResult, MalformedFile, SchemaViolation

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TestCase:
    """One stdin/stdout pair; candidates read `input`, must print `expected_output`."""

    __test__ = False  # keep pytest from collecting this as a test class

    input: str
    expected_output: str


@dataclass(frozen=True)
class Problem:
    id: str
    statement: str
    public_tests: tuple[TestCase, ...]
    private_tests: tuple[TestCase, ...]
    release_date: dt.date | None = None
    time_limit_override: float | None = None

    @property
    def tests(self) -> tuple[TestCase, ...]:
        """All tests, public first — the order verdicts are reported in."""
        return self.public_tests + self.private_tests


@dataclass(frozen=True)
class Dataset:
    name: str
    problems: tuple[Problem, ...]

    def to_json(self) -> str:
        """Canonical serialization; loading then serializing is byte-stable."""
        return json.dumps(_dataset_to_obj(self), sort_keys=True, ensure_ascii=False)


def _dataset_to_obj(dataset: Dataset) -> dict:
    def test_obj(t: TestCase) -> dict:
        return {"input": t.input, "output": t.expected_output}

    problems = []
    for p in dataset.problems:
        obj: dict = {
            "id": p.id,
            "statement": p.statement,
            "public_tests": [test_obj(t) for t in p.public_tests],
            "private_tests": [test_obj(t) for t in p.private_tests],
        }
        if p.release_date is not None:
            obj["release_date"] = p.release_date.isoformat()
        if p.time_limit_override is not None:
            obj["time_limit_override"] = p.time_limit_override
        problems.append(obj)
    return {"name": dataset.name, "problems": problems}


def _parse_tests(raw: object, problem_id: str, field: str) -> tuple[TestCase, ...]:
    if not isinstance(raw, list):
        raise SchemaViolation(f"problem {problem_id!r}: {field} must be a list")
    tests = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict):
            raise SchemaViolation(f"problem {problem_id!r}: {field}[{i}] must be an object")
        inp = item.get("input")
        out = item.get("output")
        if not isinstance(inp, str) or not isinstance(out, str):
            raise SchemaViolation(
                f"problem {problem_id!r}: {field}[{i}] needs string 'input' and 'output'"
            )
        tests.append(TestCase(input=inp, expected_output=out))
    return tuple(tests)


def _parse_problem(raw: object, index: int) -> Problem:
    if not isinstance(raw, dict):
        raise SchemaViolation(f"problems[{index}] must be an object")
    problem_id = raw.get("id")
    if not isinstance(problem_id, str) or not problem_id:
        raise SchemaViolation(f"problems[{index}] is missing a nonempty string 'id'")
    statement = raw.get("statement")
    if not isinstance(statement, str) or not statement:
        raise SchemaViolation(f"problem {problem_id!r}: missing nonempty 'statement'")

    public = _parse_tests(raw.get("public_tests", []), problem_id, "public_tests")
    private = _parse_tests(raw.get("private_tests", []), problem_id, "private_tests")
    if len(public) + len(private) == 0:
        raise SchemaViolation(f"problem {problem_id!r}: needs at least one test")

    release_date = None
    if raw.get("release_date") is not None:
        try:
            release_date = dt.date.fromisoformat(raw["release_date"])
        except (TypeError, ValueError) as exc:
            raise SchemaViolation(
                f"problem {problem_id!r}: bad release_date {raw['release_date']!r}"
            ) from exc

    time_limit = raw.get("time_limit_override")
    if time_limit is not None:
        if not isinstance(time_limit, (int, float)) or time_limit <= 0:
            raise SchemaViolation(f"problem {problem_id!r}: time_limit_override must be > 0")
        time_limit = float(time_limit)

    return Problem(
        id=problem_id,
        statement=statement,
        public_tests=public,
        private_tests=private,
        release_date=release_date,
        time_limit_override=time_limit,
    )


def load_dataset(path: str | Path) -> Dataset:
    """Load and validate a dataset file; problems come back sorted by id."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedFile(f"cannot read {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"{path} is not valid JSON: {exc}") from exc

    if not isinstance(obj, dict):
        raise SchemaViolation("top level must be an object")
    name = obj.get("name")
    if not isinstance(name, str) or not name:
        raise SchemaViolation("dataset needs a nonempty string 'name'")
    raw_problems = obj.get("problems")
    if not isinstance(raw_problems, list) or not raw_problems:
        raise SchemaViolation("dataset needs a nonempty 'problems' list")

    problems = [_parse_problem(raw, i) for i, raw in enumerate(raw_problems)]
    seen: set[str] = set()
    for p in problems:
        if p.id in seen:
            raise SchemaViolation(f"duplicate problem id {p.id!r}")
        seen.add(p.id)
    problems.sort(key=lambda p: p.id)
    return Dataset(name=name, problems=tuple(problems))


def filter_by_date(dataset: Dataset, start: dt.date, end: dt.date) -> Dataset:
    """Keep problems released inside [start, end], both ends inclusive.

    Problems without a release date are dropped (conservative for
    contamination control) and counted in a warning.
    """
    if start > end:
        raise ValueError(f"start {start} is after end {end}")
    kept = []
    undated = 0
    for p in dataset.problems:
        if p.release_date is None:
            undated += 1
        elif start <= p.release_date <= end:
            kept.append(p)
    if undated:
        logger.warning(
            "date filter dropped %d problem(s) without a release_date", undated
        )
    if not kept:
        raise EmptyResult(
            f"no problem of {dataset.name!r} falls inside [{start}, {end}]"
            f" ({undated} undated)"
        )
    return Dataset(name=dataset.name, problems=tuple(kept))
