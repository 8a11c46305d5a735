"""Round-trip identity for every serializable type, plus line-level parsing."""

from __future__ import annotations

import json

import pytest
from hypothesis import given, settings

from taskmint import serde
from taskmint.errors import ParseError
from tests import strategies as mint
from tests.conftest import make_newsletter_rubric, make_newsletter_task, make_reference_trajectory


@given(mint.personas)
def test_persona_round_trip(p):
    assert serde.persona_from_obj(serde.persona_to_obj(p)) == p


@given(mint.tool_specs())
def test_tool_round_trip(t):
    assert serde.tool_from_obj(serde.tool_to_obj(t)) == t


@settings(max_examples=50)
@given(mint.synth_tasks())
def test_task_round_trip(t):
    assert serde.task_from_obj(json.loads(json.dumps(serde.task_to_obj(t)))) == t


@given(mint.canonical_calls)
def test_call_round_trip(c):
    assert serde.call_from_obj(json.loads(json.dumps(serde.call_to_obj(c)))) == c


@settings(max_examples=50)
@given(mint.trajectories())
def test_trajectory_round_trip(t):
    assert serde.trajectory_from_obj(json.loads(json.dumps(serde.trajectory_to_obj(t)))) == t


@given(mint.rubrics)
def test_rubric_round_trip(r):
    assert serde.rubric_from_obj(serde.rubric_to_obj(r)) == r


@given(mint.reward_reports())
def test_reward_report_round_trip(r):
    obj = serde.reward_report_to_obj(r)
    assert serde.reward_report_from_obj(json.loads(json.dumps(obj))) == r
    assert obj["reward_float"] == pytest.approx(float(r.reward))


@given(mint.coverage_reports())
def test_coverage_report_round_trip(r):
    assert serde.coverage_report_from_obj(json.loads(json.dumps(serde.coverage_report_to_obj(r)))) == r


@given(mint.reasoning_tasks)
def test_reasoning_task_round_trip(t):
    assert serde.reasoning_task_from_obj(serde.reasoning_task_to_obj(t)) == t


@given(mint.rejections)
def test_rejection_round_trip(r):
    assert serde.rejection_from_obj(serde.rejection_to_obj(r)) == r


def test_newsletter_fixtures_round_trip_bit_exactly():
    task = make_newsletter_task()
    line = serde.dump_line(serde.task_to_obj(task))
    assert serde.task_from_obj(json.loads(line)) == task
    assert serde.dump_line(serde.task_to_obj(serde.task_from_obj(json.loads(line)))) == line

    rubric = make_newsletter_rubric(task)
    assert serde.rubric_from_obj(serde.rubric_to_obj(rubric)) == rubric

    trajectory = make_reference_trajectory(task)
    assert serde.trajectory_from_obj(serde.trajectory_to_obj(trajectory)) == trajectory


def test_empty_file_gives_empty_list(tmp_path):
    path = tmp_path / "tasks.jsonl"
    path.write_text("", encoding="utf-8")
    assert serde.load_records(path, serde.task_from_obj) == []


def test_truncated_record_names_its_line(tmp_path):
    task = make_newsletter_task()
    good = serde.dump_line(serde.task_to_obj(task))
    path = tmp_path / "tasks.jsonl"
    path.write_text(good + "\n" + good[: len(good) // 2] + "\n", encoding="utf-8")
    with pytest.raises(ParseError) as err:
        serde.load_records(path, serde.task_from_obj)
    assert err.value.line == 2


def test_schema_violation_names_its_line(tmp_path):
    path = tmp_path / "tasks.jsonl"
    path.write_text('{"task_id": "x"}\n', encoding="utf-8")
    with pytest.raises(ParseError) as err:
        serde.load_records(path, serde.task_from_obj)
    assert err.value.line == 1
    assert "persona" in str(err.value)


def test_write_records_is_atomic_and_rereadable(tmp_path):
    tasks = [make_newsletter_task()]
    path = tmp_path / "out" / "tasks.jsonl"
    count = serde.write_records(path, tasks, serde.task_to_obj)
    assert count == 1
    assert serde.load_records(path, serde.task_from_obj) == tasks
    assert [p.name for p in path.parent.iterdir()] == ["tasks.jsonl"]  # no temp litter
