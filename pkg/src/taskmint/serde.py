"""Serialized forms: one UTF-8 JSON record per line, one file per type.

Round-trip identity holds for every type: ``from_obj(to_obj(x)) == x``.
Tool specs use the function-calling layout (see :mod:`taskmint.toolspec`),
fractions serialize as exact ``"n/d"`` strings so no precision is lost.
"""

from __future__ import annotations

import json
import os
import tempfile
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, TypeVar

from .errors import MissingField, ParseError, SchemaError
from .toolspec import tool_to_function_schema, validate_tool_spec
from .types import (
    CanonicalCall,
    CoverageReport,
    ForbiddenConstraint,
    Message,
    PersonaRecord,
    ReasoningTask,
    RejectionRecord,
    RewardReport,
    Rubric,
    SynthTask,
    ToolSpec,
    Trajectory,
    WorkflowStep,
)

T = TypeVar("T")


def _require(obj: dict, key: str, path: str = "$") -> Any:
    if key not in obj:
        raise MissingField(f"missing {key!r}", f"{path}.{key}")
    return obj[key]


def _frac_str(f: Fraction) -> str:
    return str(f)


def _frac(s: Any, path: str) -> Fraction:
    try:
        return Fraction(str(s))
    except (ValueError, ZeroDivisionError) as e:
        raise SchemaError(f"bad fraction {s!r}: {e}", path)


# ---------------------------------------------------------------------------
# per-type converters


def persona_to_obj(p: PersonaRecord) -> dict:
    return {"id": p.id, "description": p.description}


def persona_from_obj(obj: dict) -> PersonaRecord:
    return PersonaRecord(id=str(_require(obj, "id")), description=str(_require(obj, "description")))


def workflow_step_to_obj(s: WorkflowStep) -> dict:
    return {"index": s.index, "description": s.description, "expected_tools": list(s.expected_tools)}


def workflow_step_from_obj(obj: dict) -> WorkflowStep:
    return WorkflowStep(
        index=int(_require(obj, "index")),
        description=str(_require(obj, "description")),
        expected_tools=tuple(obj.get("expected_tools", ())),
    )


def tool_to_obj(t: ToolSpec) -> dict:
    return tool_to_function_schema(t)


def tool_from_obj(obj: dict) -> ToolSpec:
    return validate_tool_spec(obj)


def constraint_to_obj(c: ForbiddenConstraint) -> dict:
    return {"description": c.description}


def constraint_from_obj(obj: dict) -> ForbiddenConstraint:
    return ForbiddenConstraint(description=str(_require(obj, "description")))


def task_to_obj(t: SynthTask) -> dict:
    return {
        "task_id": t.task_id,
        "persona": persona_to_obj(t.persona),
        "workflow": [workflow_step_to_obj(s) for s in t.workflow],
        "toolset": [tool_to_obj(x) for x in t.toolset],
        "forbidden": [constraint_to_obj(c) for c in t.forbidden],
        "instruction": t.instruction,
        "hidden_context": t.hidden_context,
    }


def task_from_obj(obj: dict) -> SynthTask:
    return SynthTask(
        task_id=str(_require(obj, "task_id")),
        persona=persona_from_obj(_require(obj, "persona")),
        workflow=tuple(workflow_step_from_obj(s) for s in _require(obj, "workflow")),
        toolset=tuple(tool_from_obj(x) for x in _require(obj, "toolset")),
        forbidden=tuple(constraint_from_obj(c) for c in obj.get("forbidden", ())),
        instruction=str(_require(obj, "instruction")),
        hidden_context=str(obj.get("hidden_context", "")),
    )


def call_to_obj(c: CanonicalCall) -> dict:
    return {"tool": c.tool, "args": c.args}


def call_from_obj(obj: dict) -> CanonicalCall:
    return CanonicalCall(tool=str(_require(obj, "tool")), args=dict(_require(obj, "args")))


def message_to_obj(m: Message) -> dict:
    return {
        "role": m.role,
        "content": m.content,
        "call": call_to_obj(m.call) if m.call is not None else None,
        "turn": m.turn,
    }


def message_from_obj(obj: dict) -> Message:
    call = obj.get("call")
    return Message(
        role=str(_require(obj, "role")),
        content=str(_require(obj, "content")),
        call=call_from_obj(call) if call is not None else None,
        turn=int(obj.get("turn", 0)),
    )


def trajectory_to_obj(t: Trajectory) -> dict:
    return {
        "task_id": t.task_id,
        "messages": [message_to_obj(m) for m in t.messages],
        "final_answer": t.final_answer,
        "terminated_reason": t.terminated_reason,
    }


def trajectory_from_obj(obj: dict) -> Trajectory:
    answer = obj.get("final_answer")
    return Trajectory(
        task_id=str(_require(obj, "task_id")),
        messages=tuple(message_from_obj(m) for m in _require(obj, "messages")),
        final_answer=str(answer) if answer is not None else None,
        terminated_reason=str(obj.get("terminated_reason", "answered")),
    )


def rubric_to_obj(r: Rubric) -> dict:
    return {
        "task_id": r.task_id,
        "forbidden": [constraint_to_obj(c) for c in r.forbidden],
        "subgoals": list(r.subgoals),
        "required_interactions": list(r.required_interactions),
    }


def rubric_from_obj(obj: dict) -> Rubric:
    return Rubric(
        task_id=str(_require(obj, "task_id")),
        forbidden=tuple(constraint_from_obj(c) for c in obj.get("forbidden", ())),
        subgoals=tuple(str(s) for s in _require(obj, "subgoals")),
        required_interactions=tuple(str(s) for s in obj.get("required_interactions", ())),
    )


def reward_report_to_obj(r: RewardReport) -> dict:
    return {
        "gate": r.gate,
        "subgoal_fraction": _frac_str(r.subgoal_fraction),
        "interaction_fraction": _frac_str(r.interaction_fraction),
        "reward": _frac_str(r.reward),
        "reward_float": float(r.reward),
    }


def reward_report_from_obj(obj: dict) -> RewardReport:
    return RewardReport(
        gate=int(_require(obj, "gate")),
        subgoal_fraction=_frac(_require(obj, "subgoal_fraction"), "$.subgoal_fraction"),
        interaction_fraction=_frac(_require(obj, "interaction_fraction"), "$.interaction_fraction"),
        reward=_frac(_require(obj, "reward"), "$.reward"),
    )


def coverage_report_to_obj(r: CoverageReport) -> dict:
    return {
        "task_id": r.task_id,
        "per_trajectory": [{str(i): bool(done) for i, done in marks.items()} for marks in r.per_trajectory],
        "best_coverage_fraction": _frac_str(r.best_coverage_fraction),
    }


def coverage_report_from_obj(obj: dict) -> CoverageReport:
    return CoverageReport(
        task_id=str(_require(obj, "task_id")),
        per_trajectory=tuple({int(i): bool(done) for i, done in marks.items()} for marks in _require(obj, "per_trajectory")),
        best_coverage_fraction=_frac(_require(obj, "best_coverage_fraction"), "$.best_coverage_fraction"),
    )


def reasoning_task_to_obj(t: ReasoningTask) -> dict:
    return {"problem": t.problem, "answer": t.answer, "scenario_variant": t.scenario_variant}


def reasoning_task_from_obj(obj: dict) -> ReasoningTask:
    return ReasoningTask(
        problem=str(_require(obj, "problem")),
        answer=str(_require(obj, "answer")),
        scenario_variant=str(obj.get("scenario_variant", "")),
    )


def rejection_to_obj(r: RejectionRecord) -> dict:
    return {"persona_id": r.persona_id, "stage": r.stage, "reason": r.reason}


def rejection_from_obj(obj: dict) -> RejectionRecord:
    return RejectionRecord(
        persona_id=str(_require(obj, "persona_id")),
        stage=str(_require(obj, "stage")),
        reason=str(_require(obj, "reason")),
    )


# ---------------------------------------------------------------------------
# line-delimited files


def dump_line(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def iter_records(lines: Iterable[str], from_obj: Callable[[dict], T]) -> Iterator[T]:
    """Parse records from an iterable of lines; blank lines are skipped.

    Raises :class:`ParseError` naming the 1-based line of the first bad record.
    """
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", lineno) from e
        try:
            yield from_obj(obj)
        except SchemaError as e:
            raise ParseError(str(e), lineno) from e


def load_records(path: str | Path, from_obj: Callable[[dict], T]) -> list[T]:
    with open(path, "r", encoding="utf-8") as fh:
        return list(iter_records(fh, from_obj))


def write_records(path: str | Path, objs: Iterable[Any], to_obj: Callable[[Any], dict]) -> int:
    """Write records atomically (temp file + rename). Returns record count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            for obj in objs:
                fh.write(dump_line(to_obj(obj)))
                fh.write("\n")
                count += 1
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return count
