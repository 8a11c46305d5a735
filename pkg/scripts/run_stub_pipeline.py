"""End-to-end offline demo: synth -> teach -> rollout -> judge -> stats.

Runs the real CLI against a scripted stub backend, so the whole pipeline
executes in seconds with no model endpoint. Everything lands in a work
directory (default /tmp/taskmint-demo), including the generated stub script.

Usage: python3 scripts/run_stub_pipeline.py [workdir]
"""

from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

WORKFLOW_REPLY = json.dumps({"steps": ["Check logs", "Verify DB state", "Execute rollback"]})

TOOLSET_REPLY = json.dumps(
    {
        "tools": [
            {
                "name": "LogSearcher",
                "description": "Searches service logs for a time window and pattern.",
                "parameters": {
                    "type": "object",
                    "properties": {
                        "service": {"type": "string", "description": "Service name."},
                        "pattern": {"type": "string", "description": "Search pattern."},
                    },
                    "required": ["service"],
                },
            },
            {
                "name": "DbInspector",
                "description": "Reports table health and replication lag.",
                "parameters": {"type": "object", "properties": {"database": {"type": "string"}}, "required": ["database"]},
            },
            {
                "name": "DeploymentRoller",
                "description": "Rolls a service back to a previous release.",
                "parameters": {
                    "type": "object",
                    "properties": {"service": {"type": "string"}, "version": {"type": "string"}},
                    "required": ["service", "version"],
                },
            },
            {
                "name": "PagerNotifier",
                "description": "Notifies the on-call rotation with a status update.",
                "parameters": {"type": "object", "properties": {"message": {"type": "string"}}, "required": ["message"]},
            },
        ],
        "forbidden": ["The agent must not reboot the database host; a restart during repair counts as a violation."],
    }
)

FUZZIFY_REPLY = json.dumps(
    {
        "instruction": "The checkout service is returning 500 errors again. Can you investigate and fix it?",
        "hidden_context": "Version v2.1 was deployed this morning. The logs show out-of-memory errors since the deploy.",
    }
)

RUBRIC_REPLY = json.dumps(
    {
        "subgoals": [
            "Identify the error pattern in the logs via LogSearcher.",
            "Verify database state via DbInspector.",
            "Roll the deployment back via DeploymentRoller.",
        ],
        "required_interactions": ["Ask what changed recently before acting."],
    }
)


def tool_call(tool: str, args: dict) -> str:
    return f'<tool_call>{json.dumps({"tool": tool, "args": args})}</tool_call>'


STUB_RULES: list[tuple[str, str]] = [
    # simulators
    (r"Incoming call:\nLogSearcher\(", 'NEW\n{"matches": 42, "first_seen": "09:12Z", "sample": "OOMKilled worker-3"}'),
    (r"Incoming call:\nDbInspector\(", 'NEW\n{"health": "degraded", "replication_lag_s": 31}'),
    (r"Incoming call:\nDeploymentRoller\(", 'NEW\n{"rolled_back_to": "v2.0", "status": "ok"}'),
    (r"Incoming call:\nPagerNotifier\(", 'NEW\n{"delivered": true}'),
    (r"asked:\n[^\n]*changed recently", "Version v2.1 went out this morning; memory use has been climbing since."),
    (r"You play the user", "Nothing else comes to mind."),
    # judges
    (r"Judge whether the transcript violates", "CLEAN"),
    (r"Judge whether the transcript achieves the subgoal", "SATISFIED"),
    (r"Judge whether the assistant in the transcript performed", "SATISFIED"),
    (r"Judge which workflow steps", "STEP 1: EXECUTED\nSTEP 2: EXECUTED\nSTEP 3: EXECUTED"),
    (r"Derive a grading rubric", RUBRIC_REPLY),
    # synthesis
    (r"Design a realistic multi-step workflow", WORKFLOW_REPLY),
    (r"Invent the virtual tool ecosystem", TOOLSET_REPLY),
    (r"Rewrite the task below as a pair", FUZZIFY_REPLY),
    # scripted teacher/policy agent, keyed on the latest environment reply
    (r"checkout service is returning 500 errors", "What changed recently, and what do the symptoms look like?"),
    (r"went out this morning", tool_call("LogSearcher", {"service": "checkout", "pattern": "OOM"})),
    (r"first_seen", tool_call("DbInspector", {"database": "checkout"})),
    (r"replication_lag_s", tool_call("DeploymentRoller", {"service": "checkout", "version": "v2.0"})),
    (r"rolled_back_to", "<answer>Rolled checkout back to v2.0 after confirming the memory errors; service recovering.</answer>"),
]

PERSONAS = [
    {"id": "sre-1", "description": "A senior SRE who owns the checkout service database."},
    {"id": "sre-2", "description": "An on-call engineer handling storefront incidents."},
    {"id": "sre-3", "description": "A platform engineer responsible for deploy rollbacks."},
]


def cli(config: Path, *args: str) -> None:
    cmd = [sys.executable, "-m", "taskmint.cli", "--config", str(config), *args]
    print("+", " ".join(cmd))
    subprocess.run(cmd, check=True)


def main() -> None:
    work = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("/tmp/taskmint-demo")
    work.mkdir(parents=True, exist_ok=True)

    script = work / "stub_script.jsonl"
    script.write_text("\n".join(json.dumps({"pattern": p, "response": r}) for p, r in STUB_RULES) + "\n", encoding="utf-8")
    personas = work / "personas.jsonl"
    personas.write_text("\n".join(json.dumps(p) for p in PERSONAS) + "\n", encoding="utf-8")
    config = work / "engine.cfg"
    config.write_text(f"backend = stub\nstub_script = {script}\njobs = 1\n", encoding="utf-8")

    corpus = work / "corpus"
    cli(config, "synth", "--personas", str(personas), "--out", str(corpus))
    cli(config, "teach", "--tasks", str(corpus / "tasks.jsonl"), "--k", "4", "--threshold", "0.5", "--out", str(corpus))
    cli(config, "rollout", "--tasks", str(corpus / "tasks.jsonl"), "--out", str(work / "rollouts"), "--n", "2")
    cli(
        config,
        "judge",
        "--trajectories",
        str(work / "rollouts" / "trajectories.jsonl"),
        "--rubrics",
        str(corpus / "rubrics.jsonl"),
        "--repeats",
        "3",
        "--out",
        str(work / "scored"),
    )
    cli(config, "stats", "--dir", str(corpus))
    print(f"\ndemo outputs under {work}")


if __name__ == "__main__":
    main()
