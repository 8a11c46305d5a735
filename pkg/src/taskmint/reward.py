"""Rubric-based trajectory scoring.

The reward is a hard gate times the average of two fractions:
``gate * (subgoal_fraction + interaction_fraction) / 2``, where the gate is
0 exactly when any forbidden behavior is judged violated. Each rubric item
gets its own strict-protocol judge call, so the fractions are exact rationals
counted from individual verdicts.

Parse-failure polarity is asymmetric by design: an unreadable subgoal verdict
counts against the agent (unsatisfied), while an unreadable forbidden-behavior
verdict counts for it (no violation) — a spurious gate-0 would annihilate the
whole reward signal.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction

from . import prompts
from .config import EngineConfig
from .gateway import LLMGateway
from .mockenv import render_transcript
from .synthesis import canonical_answer
from .types import USER, ChatRequest, Message, RewardReport, Rubric, Trajectory

logger = logging.getLogger(__name__)

VERDICT_ATTEMPTS = 2  # one retry for unreadable judge replies


@dataclass
class JudgeCall:
    """One persisted judge interaction, for audit and variance recomputation."""

    kind: str  # forbidden | subgoal | interaction | equivalence
    item: str
    verdict: str  # normalized verdict token
    raw: str  # raw judge reply


@dataclass
class JudgeAudit:
    calls: list[JudgeCall] = field(default_factory=list)

    def record(self, kind: str, item: str, verdict: str, raw: str) -> None:
        self.calls.append(JudgeCall(kind=kind, item=item, verdict=verdict, raw=raw))

    def to_objs(self) -> list[dict]:
        return [{"kind": c.kind, "item": c.item, "verdict": c.verdict, "raw": c.raw} for c in self.calls]


class RewardJudge:
    """Scores trajectories against rubrics through the configured judge model."""

    def __init__(self, config: EngineConfig, gateway: LLMGateway):
        self.config = config
        self.gateway = gateway

    def _ask(self, prompt: str) -> str:
        response = self.gateway.complete(
            ChatRequest(
                model_tag=self.config.judge_model,
                messages=(Message(role=USER, content=prompt, turn=0),),
                max_tokens=self.config.max_response_tokens,
                temperature=self.config.judge_temperature,
            )
        )
        return response.content

    def _verdict(self, prompt: str, expected: tuple[str, str]) -> tuple[str | None, str]:
        """Return (verdict token or None, raw reply); retries once on protocol violations."""
        raw = ""
        for _ in range(VERDICT_ATTEMPTS):
            try:
                raw = self._ask(prompt)
            except Exception as e:
                raw = f"<judge error: {e}>"
                continue
            first = raw.strip().splitlines()[0].strip().upper() if raw.strip() else ""
            if first in expected:
                return first, raw
        return None, raw

    # -- components ----------------------------------------------------------

    def judge_forbidden(self, trajectory: Trajectory, rubric: Rubric, audit: JudgeAudit | None = None) -> int:
        """Gate: 0 iff any forbidden behavior is judged violated.

        No constraints means nothing can be violated — gate 1. An unreadable
        verdict is treated as non-violation, with a warning.
        """
        transcript = render_transcript(trajectory.messages)
        gate = 1
        for constraint in rubric.forbidden:
            prompt = prompts.render("forbidden_judge", constraint=constraint.description, transcript=transcript)
            verdict, raw = self._verdict(prompt, ("VIOLATED", "CLEAN"))
            if verdict is None:
                logger.warning("unreadable forbidden verdict for %r; counting as CLEAN", constraint.description[:60])
                verdict = "CLEAN"
            if audit is not None:
                audit.record("forbidden", constraint.description, verdict, raw)
            if verdict == "VIOLATED":
                gate = 0
        return gate

    def _score_items(self, kind: str, template: str, items: tuple[str, ...], trajectory: Trajectory, audit: JudgeAudit | None) -> Fraction:
        if not items:
            return Fraction(1)  # vacuously satisfied
        transcript = render_transcript(trajectory.messages)
        satisfied = 0
        for item in items:
            prompt = prompts.render(template, item=item, transcript=transcript)
            verdict, raw = self._verdict(prompt, ("SATISFIED", "UNSATISFIED"))
            if verdict is None:
                verdict = "UNSATISFIED"  # unreadable counts against the agent
            if audit is not None:
                audit.record(kind, item, verdict, raw)
            if verdict == "SATISFIED":
                satisfied += 1
        return Fraction(satisfied, len(items))

    def score_subgoals(self, trajectory: Trajectory, rubric: Rubric, audit: JudgeAudit | None = None) -> Fraction:
        """Fraction of rubric subgoals the transcript satisfies, exact."""
        if not rubric.subgoals:
            raise ValueError("rubric has no subgoals")
        return self._score_items("subgoal", "subgoal_judge", rubric.subgoals, trajectory, audit)

    def score_interactions(self, trajectory: Trajectory, rubric: Rubric, audit: JudgeAudit | None = None) -> Fraction:
        """Fraction of required user interactions the transcript satisfies."""
        return self._score_items("interaction", "interaction_judge", rubric.required_interactions, trajectory, audit)

    def compute_reward(self, trajectory: Trajectory, rubric: Rubric, audit: JudgeAudit | None = None) -> RewardReport:
        """Full gated reward for one trajectory."""
        gate = self.judge_forbidden(trajectory, rubric, audit)
        subgoals = self.score_subgoals(trajectory, rubric, audit)
        interactions = self.score_interactions(trajectory, rubric, audit)
        return RewardReport.from_components(gate, subgoals, interactions)

    # -- reasoning answers ----------------------------------------------------

    def score_reasoning(self, answer: str, gold: str, mode: str = "exact") -> int:
        """Binary answer-correctness score.

        Exact mode compares canonicalized strings (numeric forms collapse, so
        '42.0' matches '42'); judge mode asks for a semantic-equivalence
        verdict and scores 0 when the verdict is unreadable.
        """
        if not gold.strip():
            raise ValueError("gold answer must be non-empty")
        if mode == "exact":
            return int(canonical_answer(answer) == canonical_answer(gold))
        if mode == "judge":
            prompt = prompts.render("equivalence_judge", gold=gold, candidate=answer)
            verdict, _ = self._verdict(prompt, ("EQUIVALENT", "DIFFERENT"))
            return int(verdict == "EQUIVALENT")
        raise ValueError(f"unknown mode {mode!r}")


def repeat_scores(
    judge: RewardJudge,
    trajectory: Trajectory,
    rubric: Rubric,
    repeats: int,
) -> tuple[list[RewardReport], list[JudgeAudit], float]:
    """Score the same trajectory ``repeats`` times; return reports, audits,
    and the population variance of the reward across repeats.

    With a temperature-0 deterministic judge the variance is exactly 0.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    reports: list[RewardReport] = []
    audits: list[JudgeAudit] = []
    for _ in range(repeats):
        audit = JudgeAudit()
        reports.append(judge.compute_reward(trajectory, rubric, audit))
        audits.append(audit)
    return reports, audits, reward_variance([r.reward for r in reports])


def reward_variance(rewards: list[Fraction]) -> float:
    """Population variance of reward values across repeats."""
    n = len(rewards)
    if n <= 1:
        return 0.0
    mean = sum(rewards) / n
    return float(sum((r - mean) ** 2 for r in rewards) / n)
