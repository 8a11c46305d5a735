"""Rubric construction from teacher demonstrations, plus the coverage filter.

Teacher trajectories align the synthesized workflow with what actually gets
executed: subgoals and required interactions are extracted from all
demonstrations jointly, and tasks whose workflow the best demonstration
still leaves largely unexecuted are dropped.
"""

from __future__ import annotations

import logging
import re
from fractions import Fraction

from . import prompts
from .config import EngineConfig
from .errors import UnparseableRubric
from .gateway import LLMGateway
from .mockenv import MockEnvironment, render_transcript
from .rollout import run_episode
from .synthesis import extract_json
from .types import (
    USER,
    ChatRequest,
    CoverageReport,
    ForbiddenConstraint,
    Message,
    Rubric,
    SynthTask,
    Trajectory,
    WorkflowStep,
)

logger = logging.getLogger(__name__)

STEP_LINE_RE = re.compile(r"^STEP\s+(\d+)\s*:\s*(EXECUTED|UNEXECUTED)\s*$", re.IGNORECASE | re.MULTILINE)


def collect_teacher_trajectories(
    env: MockEnvironment,
    gateway: LLMGateway,
    task: SynthTask,
    k: int | None = None,
    group_prefix: str = "teach",
) -> list[Trajectory]:
    """Run ``k`` independent teacher sessions on the task.

    All k sessions share one consistency map (same rollout group), and every
    trajectory is returned — including failed ones, which the coverage filter
    then weighs like any other.
    """
    cfg: EngineConfig = env.config
    k = cfg.teacher_demos if k is None else k
    scope = f"{group_prefix}-{task.task_id}"
    return [
        run_episode(env, gateway, task, cfg.teacher_model, scope=scope, temperature=cfg.synthesis_temperature)
        for _ in range(k)
    ]


def extract_rubric(
    config: EngineConfig,
    gateway: LLMGateway,
    workflow: tuple[WorkflowStep, ...],
    trajectories: list[Trajectory],
    forbidden: tuple[ForbiddenConstraint, ...],
    task_id: str,
) -> Rubric:
    """Extract subgoals and required interactions from all demonstrations jointly."""
    if not trajectories:
        raise UnparseableRubric("rubric extraction needs at least one trajectory")
    prompt = prompts.render(
        "rubric_extract",
        workflow="\n".join(f"{s.index}. {s.description}" for s in workflow),
        k=str(len(trajectories)),
        trajectories="\n\n".join(
            f"--- attempt {i + 1} ---\n{render_transcript(t.messages)}" for i, t in enumerate(trajectories)
        ),
    )
    last_reason = "no attempts made"
    for _ in range(config.stage_attempts):
        response = gateway.complete(
            ChatRequest(
                model_tag=config.synthesizer_model,
                messages=(Message(role=USER, content=prompt, turn=0),),
                max_tokens=config.max_response_tokens,
                temperature=config.judge_temperature,
            )
        )
        try:
            obj = extract_json(response.content)
            subgoals = tuple(str(s) for s in obj.get("subgoals", ()))
            interactions = tuple(str(s) for s in obj.get("required_interactions", ()))
            if not subgoals:
                raise ValueError("empty subgoal list")
            return Rubric(
                task_id=task_id,
                forbidden=forbidden,
                subgoals=subgoals,
                required_interactions=interactions,
            )
        except ValueError as e:
            last_reason = str(e)
    raise UnparseableRubric(f"after {config.stage_attempts} attempts: {last_reason}")


def judge_step_coverage(
    config: EngineConfig,
    gateway: LLMGateway,
    workflow: tuple[WorkflowStep, ...],
    trajectory: Trajectory,
) -> dict[int, bool]:
    """Mark each workflow step executed/unexecuted in one trajectory.

    Steps the judge fails to rule on count as unexecuted (conservative).
    """
    prompt = prompts.render(
        "coverage_judge",
        steps="\n".join(f"{s.index}. {s.description}" for s in workflow),
        transcript=render_transcript(trajectory.messages),
    )
    marks = {s.index: False for s in workflow}
    try:
        response = gateway.complete(
            ChatRequest(
                model_tag=config.judge_model,
                messages=(Message(role=USER, content=prompt, turn=0),),
                max_tokens=config.max_response_tokens,
                temperature=config.judge_temperature,
            )
        )
    except Exception as e:
        logger.warning("coverage judge failed (%s); all steps count unexecuted", e)
        return marks
    for m in STEP_LINE_RE.finditer(response.content):
        idx = int(m.group(1))
        if idx in marks:
            marks[idx] = m.group(2).upper() == "EXECUTED"
    return marks


def coverage_filter(
    config: EngineConfig,
    gateway: LLMGateway,
    workflow: tuple[WorkflowStep, ...],
    trajectories: list[Trajectory],
    task_id: str,
    threshold: float | Fraction | None = None,
) -> tuple[bool, CoverageReport]:
    """Keep a task iff its best demonstration covers enough of the workflow.

    Aggregation is the max over trajectories — the teacher has to complete
    the workflow somehow, not every time — so adding a trajectory can never
    flip keep into drop.
    """
    threshold = config.coverage_threshold if threshold is None else threshold
    threshold = Fraction(str(threshold)) if not isinstance(threshold, Fraction) else threshold
    if not (0 < threshold <= 1):
        raise ValueError("coverage threshold must lie in (0, 1]")
    per_trajectory = tuple(judge_step_coverage(config, gateway, workflow, t) for t in trajectories)
    report = CoverageReport(
        task_id=task_id,
        per_trajectory=per_trajectory,
        best_coverage_fraction=best_coverage(per_trajectory),
    )
    return report.best_coverage_fraction >= threshold, report


def best_coverage(per_trajectory: tuple[dict[int, bool], ...]) -> Fraction:
    fractions = [
        Fraction(sum(1 for done in marks.values() if done), len(marks)) if marks else Fraction(0)
        for marks in per_trajectory
    ]
    return max(fractions, default=Fraction(0))
