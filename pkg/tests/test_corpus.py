from __future__ import annotations

import datetime as dt
import json

import pytest

from ideatree.corpus import Dataset, Problem, TestCase, filter_by_date, load_dataset
from ideatree.errors import EmptyResult, MalformedFile, SchemaViolation


def _write(tmp_path, obj):
    path = tmp_path / "ds.json"
    path.write_text(json.dumps(obj), encoding="utf-8")
    return path


def _problem_obj(pid, date=None):
    obj = {
        "id": pid,
        "statement": f"solve {pid}",
        "public_tests": [{"input": "1\n", "output": "2\n"}],
        "private_tests": [{"input": "3\n", "output": "4\n"}],
    }
    if date:
        obj["release_date"] = date
    return obj


def test_load_three_problems_sorted(tmp_path):
    path = _write(tmp_path, {"name": "d", "problems": [_problem_obj(p) for p in "cab"]})
    ds = load_dataset(path)
    assert [p.id for p in ds.problems] == ["a", "b", "c"]
    assert ds.name == "d"
    assert ds.problems[0].tests == (
        TestCase("1\n", "2\n"),
        TestCase("3\n", "4\n"),
    )


def test_load_is_idempotent(tmp_path):
    path = _write(
        tmp_path,
        {"name": "d", "problems": [_problem_obj("a", "2024-05-01"), _problem_obj("b")]},
    )
    assert load_dataset(path).to_json() == load_dataset(path).to_json()


def test_duplicate_id_names_problem(tmp_path):
    path = _write(tmp_path, {"name": "d", "problems": [_problem_obj("p1"), _problem_obj("p1")]})
    with pytest.raises(SchemaViolation, match="p1"):
        load_dataset(path)


def test_zero_tests_rejected(tmp_path):
    bad = _problem_obj("p9")
    bad["public_tests"] = []
    bad["private_tests"] = []
    path = _write(tmp_path, {"name": "d", "problems": [bad]})
    with pytest.raises(SchemaViolation, match="p9"):
        load_dataset(path)


def test_unparsable_file(tmp_path):
    path = tmp_path / "junk.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(MalformedFile):
        load_dataset(path)
    with pytest.raises(MalformedFile):
        load_dataset(tmp_path / "missing.json")


def test_bad_release_date(tmp_path):
    path = _write(tmp_path, {"name": "d", "problems": [_problem_obj("p1", "05/01/2024")]})
    with pytest.raises(SchemaViolation, match="p1"):
        load_dataset(path)


def _dated_dataset(dates):
    problems = tuple(
        Problem(
            id=f"p{i}",
            statement="s",
            public_tests=(TestCase("1", "1"),),
            private_tests=(),
            release_date=date,
        )
        for i, date in enumerate(dates)
    )
    return Dataset(name="d", problems=problems)


def test_date_window_is_inclusive():
    ds = _dated_dataset(
        [dt.date(2024, 4, 30), dt.date(2024, 5, 1), dt.date(2024, 9, 30)]
    )
    kept = filter_by_date(ds, dt.date(2024, 5, 1), dt.date(2024, 9, 30))
    assert [p.release_date for p in kept.problems] == [
        dt.date(2024, 5, 1),
        dt.date(2024, 9, 30),
    ]


def test_degenerate_window():
    ds = _dated_dataset([dt.date(2024, 6, 1), dt.date(2024, 6, 2)])
    kept = filter_by_date(ds, dt.date(2024, 6, 1), dt.date(2024, 6, 1))
    assert len(kept.problems) == 1


def test_undated_dropped_and_empty_result(caplog):
    ds = _dated_dataset([None, None, None])
    with pytest.raises(EmptyResult):
        filter_by_date(ds, dt.date(2024, 1, 1), dt.date(2024, 12, 31))
    assert "3 problem(s)" in caplog.text


def test_wide_window_keeps_all_dated():
    ds = _dated_dataset([dt.date(2024, 5, 1), None, dt.date(2024, 7, 1)])
    kept = filter_by_date(ds, dt.date.min, dt.date.max)
    assert [p.id for p in kept.problems] == ["p0", "p2"]


def test_reversed_window_rejected():
    ds = _dated_dataset([dt.date(2024, 5, 1)])
    with pytest.raises(ValueError):
        filter_by_date(ds, dt.date(2024, 6, 1), dt.date(2024, 5, 1))
