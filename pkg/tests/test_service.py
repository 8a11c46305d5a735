"""Service wire protocol: registration, sessions, stepping, judging, stats."""

from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from taskmint import PROTOCOL_VERSION
from taskmint.config import EngineConfig
from taskmint.service import ServiceState, create_app
from taskmint.serde import rubric_to_obj, task_to_obj
from taskmint.types import SynthTask
from tests.conftest import (
    all_satisfied_judge_rules,
    make_gateway,
    make_newsletter_rubric,
    make_newsletter_task,
    newsletter_episode_rules,
    tool_call_text,
)


def task_with_n_tools(n: int) -> SynthTask:
    base = make_newsletter_task()
    return SynthTask(
        task_id=f"task{n:012d}",
        persona=base.persona,
        workflow=base.workflow,
        toolset=base.toolset[:n],
        forbidden=base.forbidden,
        instruction=base.instruction,
        hidden_context=base.hidden_context,
    )


@pytest.fixture
def client():
    # judge rules first: judge prompts embed transcripts whose text would
    # otherwise trigger the scripted agent/simulator rules
    state = ServiceState(EngineConfig(), make_gateway(all_satisfied_judge_rules() + newsletter_episode_rules()))
    return TestClient(create_app(state))


def register_newsletter(client) -> str:
    task = make_newsletter_task()
    rubric = make_newsletter_rubric(task)
    body = {"tasks": [task_to_obj(task)], "rubrics": [rubric_to_obj(rubric)]}
    response = client.post("/tasks", json=body)
    assert response.status_code == 200, response.text
    return response.json()["result"]["task_ids"][0]


def test_version_reports_protocol(client):
    body = client.get("/version").json()
    assert body["result"]["protocol_version"] == PROTOCOL_VERSION


def test_register_is_idempotent(client):
    first = register_newsletter(client)
    second = register_newsletter(client)
    assert first == second == make_newsletter_task().task_id


def test_register_rejects_malformed_tool_spec(client):
    task = task_to_obj(make_newsletter_task())
    task["toolset"][0]["parameters"]["properties"]["9bad"] = {"type": "string"}
    response = client.post("/tasks", json={"tasks": [task]})
    assert response.status_code == 400
    error = response.json()["error"]
    assert error["code"] == "validation_error"
    assert "9bad" in error["message"]  # names the field path


def test_register_conflicting_content_is_409(client):
    register_newsletter(client)
    altered = task_to_obj(make_newsletter_task())
    altered["instruction"] = "Something entirely different."
    response = client.post("/tasks", json={"tasks": [altered]})
    assert response.status_code == 409
    assert response.json()["error"]["code"] == "conflicting_content"


def test_rubric_for_unknown_task_is_400(client):
    rubric = rubric_to_obj(make_newsletter_rubric())
    rubric["task_id"] = "f" * 16
    response = client.post("/tasks", json={"tasks": [], "rubrics": [rubric]})
    assert response.status_code == 400


def test_open_session_returns_prompt_and_instruction(client):
    task_id = register_newsletter(client)
    response = client.post("/sessions", json={"task_id": task_id, "group_id": "g1"})
    body = response.json()["result"]
    assert body["session_id"]
    assert make_newsletter_task().instruction in body["system_prompt"]
    assert body["instruction"] == make_newsletter_task().instruction
    assert body["turns_remaining"] == 16


def test_unknown_task_404(client):
    response = client.post("/sessions", json={"task_id": "nope"})
    assert response.status_code == 404
    assert response.json()["error"]["code"] == "unknown_task"


def test_same_group_shares_map_distinct_groups_do_not(client):
    task_id = register_newsletter(client)
    call = tool_call_text("VoiceTranscriber", {"audio_file_path": "x.mp3"})

    s1 = client.post("/sessions", json={"task_id": task_id, "group_id": "shared"}).json()["result"]
    r1 = client.post(f"/sessions/{s1['session_id']}/step", json={"agent_message": call}).json()["result"]
    assert r1["kind"] == "tool_response" and r1["map_hit"] is False

    s2 = client.post("/sessions", json={"task_id": task_id, "group_id": "shared"}).json()["result"]
    r2 = client.post(f"/sessions/{s2['session_id']}/step", json={"agent_message": call}).json()["result"]
    assert r2["map_hit"] is True
    assert r2["content"] == r1["content"]

    s3 = client.post("/sessions", json={"task_id": task_id, "group_id": "other"}).json()["result"]
    r3 = client.post(f"/sessions/{s3['session_id']}/step", json={"agent_message": call}).json()["result"]
    assert r3["map_hit"] is False


def test_step_after_terminal_is_409(client):
    task_id = register_newsletter(client)
    session = client.post("/sessions", json={"task_id": task_id}).json()["result"]
    done = client.post(f"/sessions/{session['session_id']}/step", json={"agent_message": "<answer>done</answer>"})
    assert done.json()["result"]["kind"] == "terminal"
    after = client.post(f"/sessions/{session['session_id']}/step", json={"agent_message": "more?"})
    assert after.status_code == 409
    assert after.json()["error"]["code"] == "session_terminated"


def test_turn_limit_over_the_wire(client):
    task_id = register_newsletter(client)
    session = client.post("/sessions", json={"task_id": task_id}).json()["result"]
    sid = session["session_id"]
    last = None
    for _ in range(16):
        last = client.post(f"/sessions/{sid}/step", json={"agent_message": "Anything else I should know?"}).json()["result"]
    assert last["kind"] == "terminal"
    assert last["reason"] == "turn_limit"
    assert last["turns_remaining"] == 0


def test_unknown_session_404(client):
    response = client.post("/sessions/ghost/step", json={"agent_message": "hi"})
    assert response.status_code == 404


def test_judge_by_session_and_by_trajectory_agree(client, reference_trajectory):
    task_id = register_newsletter(client)
    session = client.post("/sessions", json={"task_id": task_id, "group_id": "j"}).json()["result"]
    sid = session["session_id"]
    from tests.conftest import NEWSLETTER_AGENT_SCRIPT

    for message in NEWSLETTER_AGENT_SCRIPT:
        client.post(f"/sessions/{sid}/step", json={"agent_message": message})
    by_session = client.post("/judge", json={"session_id": sid}).json()["result"]
    assert by_session["reward"] == "1"

    from taskmint.serde import trajectory_to_obj

    by_trajectory = client.post("/judge", json={"trajectory": trajectory_to_obj(reference_trajectory)}).json()["result"]
    assert by_trajectory["reward"] == "1"


def test_judge_without_rubric_is_404(client):
    task = task_with_n_tools(3)
    client.post("/tasks", json={"tasks": [task_to_obj(task)]})
    session = client.post("/sessions", json={"task_id": task.task_id}).json()["result"]
    response = client.post("/judge", json={"session_id": session["session_id"]})
    assert response.status_code == 404
    assert response.json()["error"]["code"] == "unknown_rubric"


def test_stats_empty_then_three_tasks(client):
    empty = client.get("/stats").json()["result"]
    assert empty["total_tasks"] == 0 and empty["avg_tools_per_task"] == 0.0

    body = {"tasks": [task_to_obj(task_with_n_tools(n)) for n in (3, 4, 5)]}
    client.post("/tasks", json=body)
    stats = client.get("/stats").json()["result"]
    assert stats["total_tasks"] == 3
    assert stats["avg_tools_per_task"] == 4.0


def test_every_response_carries_result_xor_error(client):
    task_id = register_newsletter(client)
    responses = [
        client.get("/version"),
        client.get("/stats"),
        client.post("/sessions", json={"task_id": task_id}),
        client.post("/sessions", json={"task_id": "missing"}),
        client.post("/tasks", json={"tasks": []}),
        client.post("/judge", json={}),
    ]
    for response in responses:
        body = response.json()
        assert ("result" in body) != ("error" in body), body


def test_wire_bodies_never_leak_hidden_context(client):
    task = make_newsletter_task()
    task_id = register_newsletter(client)
    session = client.post("/sessions", json={"task_id": task_id, "group_id": "h"})
    bodies = [session.text]
    sid = session.json()["result"]["session_id"]
    for message in ("Do you have a featured image to include? A URL works best.", "<answer>done</answer>"):
        bodies.append(client.post(f"/sessions/{sid}/step", json={"agent_message": message}).text)
    for body in bodies:
        assert task.hidden_context not in body
        for sentence in task.hidden_context.split("."):
            if sentence.strip():
                assert sentence.strip() not in body


def test_concurrent_step_on_one_session_is_409(client):
    task_id = register_newsletter(client)
    session = client.post("/sessions", json={"task_id": task_id}).json()["result"]
    state = client.app.state.engine
    lock = state._step_locks[session["session_id"]]
    assert lock.acquire(blocking=False)  # simulate an in-flight step
    try:
        response = client.post(f"/sessions/{session['session_id']}/step", json={"agent_message": "hi"})
        assert response.status_code == 409
        assert response.json()["error"]["code"] == "step_in_flight"
    finally:
        lock.release()
    # step proceeds once the in-flight one finishes
    ok = client.post(f"/sessions/{session['session_id']}/step", json={"agent_message": "<answer>x</answer>"})
    assert ok.status_code == 200


def test_snapshot_writes_sessions_and_maps(client, tmp_path):
    task_id = register_newsletter(client)
    session = client.post("/sessions", json={"task_id": task_id, "group_id": "s"}).json()["result"]
    client.post(f"/sessions/{session['session_id']}/step", json={"agent_message": "<answer>done</answer>"})
    state = client.app.state.engine
    state.snapshot(tmp_path)
    assert (tmp_path / "trajectories.jsonl").exists()
    assert (tmp_path / "maps.jsonl").exists()
    lines = (tmp_path / "trajectories.jsonl").read_text(encoding="utf-8").strip().splitlines()
    assert len(lines) == 1
    assert json.loads(lines[0])["task_id"] == task_id
