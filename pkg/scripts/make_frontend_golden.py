"""Regenerate the frontend client's test fixtures from the reference episode.

Writes, under frontend/test/fixtures/:
  engine.cfg / stub_script.jsonl  -- config + script for a stub-backed server
  bundle.json                     -- task + rubric registration body
  agent_script.json               -- the fixed agent messages of the episode
  golden.json                     -- expected replies, transcript, and reward
                                     from an in-process run of the same episode

The TypeScript tests spawn the server with this config, replay the agent
script through the published client, and compare bit-for-bit.

Usage: python3 scripts/make_frontend_golden.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO_ROOT))

from taskmint.config import EngineConfig
from taskmint.mockenv import MapStore, MockEnvironment
from taskmint.reward import RewardJudge
from taskmint.serde import reward_report_to_obj, rubric_to_obj, task_to_obj, trajectory_to_obj
from tests.conftest import (
    NEWSLETTER_AGENT_SCRIPT,
    all_satisfied_judge_rules,
    make_gateway,
    make_newsletter_rubric,
    make_newsletter_task,
    newsletter_episode_rules,
)

FIXTURE_DIR = REPO_ROOT / "frontend" / "test" / "fixtures"


def violating_trajectory(task) -> dict:
    """Transcribes an unconfirmed recording: the duration constraint judge
    fires on the marker filename."""
    from taskmint.types import CanonicalCall, Message, Trajectory

    call = CanonicalCall("VoiceTranscriber", {"audio_file_path": "mystery_untimed.mp3"})
    trajectory = Trajectory(
        task_id=task.task_id,
        messages=(
            Message("system", "s", turn=0),
            Message("user", task.instruction, turn=1),
            Message("tool_call", '<tool_call>{"tool": "VoiceTranscriber", "args": {"audio_file_path": "mystery_untimed.mp3"}}</tool_call>', call=call, turn=2),
            Message("tool_response", '{"transcribed_text": "..."}', turn=3),
        ),
        final_answer=None,
        terminated_reason="turn_limit",
    )
    return trajectory_to_obj(trajectory)


def main() -> None:
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    rules = (
        # marker-keyed violation verdict must precede the generic CLEAN rule
        [(r"Judge whether the transcript violates.*mystery_untimed", "VIOLATED")]
        + all_satisfied_judge_rules()
        + newsletter_episode_rules()
    )

    script_path = FIXTURE_DIR / "stub_script.jsonl"
    script_path.write_text(
        "\n".join(json.dumps({"pattern": p, "response": r}) for p, r in rules) + "\n", encoding="utf-8"
    )
    # stub_script is relative: the server resolves it against the config dir
    (FIXTURE_DIR / "engine.cfg").write_text(
        "backend = stub\nstub_script = stub_script.jsonl\nbind_host = 127.0.0.1\nbind_port = 8765\n",
        encoding="utf-8",
    )

    task = make_newsletter_task()
    rubric = make_newsletter_rubric(task)
    (FIXTURE_DIR / "bundle.json").write_text(
        json.dumps({"tasks": [task_to_obj(task)], "rubrics": [rubric_to_obj(rubric)]}, indent=2) + "\n",
        encoding="utf-8",
    )
    (FIXTURE_DIR / "agent_script.json").write_text(
        json.dumps(list(NEWSLETTER_AGENT_SCRIPT), indent=2) + "\n", encoding="utf-8"
    )
    (FIXTURE_DIR / "violating_trajectory.json").write_text(
        json.dumps(violating_trajectory(task), indent=2) + "\n", encoding="utf-8"
    )

    # in-process reference run with the same scripted backend
    env = MockEnvironment(EngineConfig(), make_gateway(rules), MapStore())
    session = env.reset(task, scope="grp")
    replies = []
    for message in NEWSLETTER_AGENT_SCRIPT:
        reply = env.step(session, message)
        body = {"kind": reply.kind, "content": reply.content, "turns_remaining": session.turns_remaining}
        if reply.kind == "tool_response":
            body["map_hit"] = reply.map_hit
        if reply.kind == "terminal":
            body["reason"] = reply.reason
        replies.append(body)
    trajectory = session.to_trajectory()
    report = RewardJudge(EngineConfig(), make_gateway(rules)).compute_reward(trajectory, rubric)

    golden = {
        "task_id": task.task_id,
        "system_prompt": session.system_prompt,
        "instruction": task.instruction,
        "replies": replies,
        "transcript": trajectory_to_obj(trajectory),
        "reward": reward_report_to_obj(report),
    }
    (FIXTURE_DIR / "golden.json").write_text(json.dumps(golden, indent=2) + "\n", encoding="utf-8")
    print(f"wrote fixtures to {FIXTURE_DIR}")


if __name__ == "__main__":
    main()
