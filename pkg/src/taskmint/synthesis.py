"""Task synthesis: persona → workflow → toolset + constraints → fuzzy split.

Each stage prompts the synthesizer model and parses a strict JSON reply,
re-prompting up to a bounded attempt budget before rejecting the persona
with a machine-readable stage name. The fuzzify stage splits an explicit
request into the agent-visible instruction and the user-private context,
enforcing an information gap: the context must contain at least one sentence
the instruction does not.

Also houses the reasoning-task scenario rewrite with its numeral-preservation
check and the n-way self-consistency filter.
"""

from __future__ import annotations

import json
import logging
import re
from collections import Counter
from typing import Callable, Iterable, Iterator

from . import prompts
from .canonical import content_hash
from .config import EngineConfig
from .errors import (
    DegenerateRewrite,
    InvalidToolSpec,
    ParseError,
    SchemaError,
    SolverFailure,
    StageError,
    UnparseableRewrite,
    UnparseableWorkflow,
)
from .gateway import LLMGateway
from .serde import persona_from_obj, persona_to_obj
from .toolspec import validate_tool_spec
from .types import (
    USER,
    ChatRequest,
    ForbiddenConstraint,
    Message,
    PersonaRecord,
    ReasoningTask,
    RejectionRecord,
    SynthTask,
    SynthesisOutcome,
    ToolSpec,
    WorkflowStep,
)

logger = logging.getLogger(__name__)

ANSWER_RE = re.compile(r"<answer>(.*?)</answer>", re.DOTALL)
NUMERAL_RE = re.compile(r"\d+(?:\.\d+)?")


def load_personas(
    lines: Iterable[str],
    lenient: bool = False,
    errors: list[ParseError] | None = None,
) -> Iterator[PersonaRecord]:
    """Yield personas from line-delimited records, in file order.

    Strict mode raises on the first malformed line. Lenient mode keeps
    yielding the good lines and reports each bad one into ``errors`` (or the
    log when no sink is given) — malformed input is never silently dropped.
    """
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            yield persona_from_obj(obj)
        except (json.JSONDecodeError, SchemaError) as e:
            err = ParseError(str(e), lineno)
            if not lenient:
                raise err from e
            if errors is not None:
                errors.append(err)
            else:
                logger.warning("skipping malformed persona line %d: %s", lineno, e)


def extract_json(text: str) -> dict:
    """Pull the first balanced JSON object out of a model reply."""
    start = text.find("{")
    if start == -1:
        raise ValueError("no JSON object in reply")
    depth = 0
    in_string = False
    escape = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                obj = json.loads(text[start : i + 1])
                if not isinstance(obj, dict):
                    raise ValueError("top-level JSON value is not an object")
                return obj
    raise ValueError("unbalanced JSON object in reply")


class Synthesizer:
    """Runs the synthesis stages against the configured gateway."""

    def __init__(self, config: EngineConfig, gateway: LLMGateway):
        self.config = config
        self.gateway = gateway

    # -- stage plumbing ------------------------------------------------------

    def _ask(self, prompt: str, temperature: float | None = None) -> tuple[str, int]:
        response = self.gateway.complete(
            ChatRequest(
                model_tag=self.config.synthesizer_model,
                messages=(Message(role=USER, content=prompt, turn=0),),
                max_tokens=self.config.max_response_tokens,
                temperature=self.config.synthesis_temperature if temperature is None else temperature,
            )
        )
        return response.content, response.usage_tokens

    def _staged(self, prompt: str, parse: Callable[[str], object], error: type[StageError]):
        """Prompt + parse with the bounded re-prompt budget."""
        tokens = 0
        last_reason = "no attempts made"
        for _ in range(self.config.stage_attempts):
            content, used = self._ask(prompt)
            tokens += used
            try:
                return parse(content), tokens
            except (ValueError, SchemaError, json.JSONDecodeError) as e:
                last_reason = str(e)
        raise error(f"after {self.config.stage_attempts} attempts: {last_reason}", tokens)

    # -- stages ---------------------------------------------------------------

    def generate_workflow(self, persona: PersonaRecord) -> tuple[tuple[WorkflowStep, ...], int]:
        prompt = prompts.render(
            "workflow",
            persona=persona.description,
            min_steps=str(self.config.workflow_min_steps),
            max_steps=str(self.config.workflow_max_steps),
        )

        def parse(content: str) -> tuple[WorkflowStep, ...]:
            obj = extract_json(content)
            raw_steps = obj.get("steps")
            if not isinstance(raw_steps, list):
                raise ValueError("reply has no 'steps' list")
            steps = []
            for i, s in enumerate(raw_steps, start=1):
                if isinstance(s, dict):
                    steps.append(
                        WorkflowStep(
                            index=i,
                            description=str(s.get("description", "")),
                            expected_tools=tuple(s.get("expected_tools", ())),
                        )
                    )
                else:
                    steps.append(WorkflowStep(index=i, description=str(s)))
            if not (self.config.workflow_min_steps <= len(steps) <= self.config.workflow_max_steps):
                raise ValueError(
                    f"expected {self.config.workflow_min_steps}-{self.config.workflow_max_steps} steps, got {len(steps)}"
                )
            return tuple(steps)

        return self._staged(prompt, parse, UnparseableWorkflow)

    def generate_toolset(
        self, workflow: tuple[WorkflowStep, ...]
    ) -> tuple[tuple[tuple[ToolSpec, ...], tuple[ForbiddenConstraint, ...]], int]:
        prompt = prompts.render(
            "toolset",
            workflow=_render_workflow(workflow),
            target=str(self.config.toolset_target),
        )

        def parse(content: str):
            obj = extract_json(content)
            raw_tools = obj.get("tools")
            if not isinstance(raw_tools, list) or not raw_tools:
                raise ValueError("reply has no non-empty 'tools' list")
            tools = tuple(validate_tool_spec(t) for t in raw_tools)
            if len({t.name for t in tools}) != len(tools):
                raise ValueError("duplicate tool names in toolset")
            raw_forbidden = obj.get("forbidden")
            if not isinstance(raw_forbidden, list) or not raw_forbidden:
                raise ValueError("reply has no non-empty 'forbidden' list")
            forbidden = tuple(ForbiddenConstraint(description=str(f)) for f in raw_forbidden)
            return tools, forbidden

        return self._staged(prompt, parse, InvalidToolSpec)

    def fuzzify(
        self, workflow: tuple[WorkflowStep, ...], toolset: tuple[ToolSpec, ...]
    ) -> tuple[tuple[str, str], int]:
        """Split an explicit task into (instruction, hidden context).

        The reply is degenerate when the context adds nothing beyond the
        instruction: at least one context sentence must be absent from it.
        """
        prompt = prompts.render(
            "fuzzify",
            workflow=_render_workflow(workflow),
            tool_names=", ".join(t.name for t in toolset),
        )

        def parse(content: str) -> tuple[str, str]:
            obj = extract_json(content)
            instruction = str(obj.get("instruction", "")).strip()
            context = str(obj.get("hidden_context", "")).strip()
            if not instruction:
                raise ValueError("empty instruction")
            if not context:
                raise ValueError("empty hidden context")
            if not _has_information_gap(instruction, context):
                raise ValueError("hidden context adds no sentence beyond the instruction")
            return instruction, context

        return self._staged(prompt, parse, DegenerateRewrite)

    # -- pipeline -------------------------------------------------------------

    def synth_pipeline(self, persona: PersonaRecord) -> SynthesisOutcome:
        """Compose the stages for one persona; any stage failure rejects it."""
        tokens = 0
        try:
            workflow, used = self.generate_workflow(persona)
            tokens += used
            (toolset, forbidden), used = self.generate_toolset(workflow)
            tokens += used
            (instruction, context), used = self.fuzzify(workflow, toolset)
            tokens += used
        except StageError as e:
            tokens += getattr(e, "tokens", 0)
            logger.info("persona %s rejected at stage %s: %s", persona.id, e.stage, e)
            return SynthesisOutcome(
                result=RejectionRecord(persona_id=persona.id, stage=e.stage, reason=str(e)),
                tokens_spent=tokens,
            )

        task = SynthTask(
            task_id=task_id_for(persona, workflow, toolset),
            persona=persona,
            workflow=workflow,
            toolset=toolset,
            forbidden=forbidden,
            instruction=instruction,
            hidden_context=context,
        )
        return SynthesisOutcome(result=task, tokens_spent=tokens)

    def synth_batch(self, personas: Iterable[PersonaRecord]) -> list[SynthesisOutcome]:
        return [self.synth_pipeline(p) for p in personas]

    # -- reasoning tasks -------------------------------------------------------

    def rewrite_reasoning_task(self, problem: str, persona: PersonaRecord | None) -> tuple[str, int]:
        """Scenario-rewrite a reasoning problem, preserving its numerals exactly.

        With no persona the original problem passes through unchanged.
        """
        if not problem.strip():
            raise UnparseableRewrite("empty problem", 0)
        if persona is None or not persona.description.strip():
            return problem, 0
        prompt = prompts.render("reasoning_rewrite", persona=persona.description, problem=problem)

        def parse(content: str) -> str:
            obj = extract_json(content)
            variant = str(obj.get("scenario", "")).strip()
            if not variant:
                raise ValueError("empty scenario")
            if Counter(NUMERAL_RE.findall(variant)) != Counter(NUMERAL_RE.findall(problem)):
                raise ValueError("rewrite does not preserve the numerals of the original")
            return variant

        variant, tokens = self._staged(prompt, parse, UnparseableRewrite)
        return variant, tokens

    def self_consistency_filter(self, task: ReasoningTask, n: int | None = None) -> bool:
        """Keep a reasoning task only when ``n`` independent solves agree.

        A solver failure (transport error or unparseable answer) counts as
        disagreement.
        """
        n = self.config.consistency_n if n is None else n
        if n < 2:
            raise ValueError("self-consistency needs n >= 2")
        problem = task.scenario_variant or task.problem
        answers: list[str] = []
        for _ in range(n):
            try:
                content, _ = self._ask(prompts.render("solver", problem=problem), temperature=self.config.synthesis_temperature)
                answers.append(_parse_answer(content))
            except Exception as e:
                logger.info("solver failure counts as disagreement: %s", e)
                return False
        canon = {canonical_answer(a) for a in answers}
        return len(canon) == 1


def _parse_answer(content: str) -> str:
    m = ANSWER_RE.search(content)
    if not m or not m.group(1).strip():
        raise SolverFailure("no <answer> in solver reply")
    return m.group(1).strip()


def canonical_answer(answer: str) -> str:
    """Normalize an answer string for equality: trim, casefold, and collapse
    numeric forms ('42.0' == '42')."""
    text = answer.strip().casefold()
    try:
        value = float(text)
    except ValueError:
        return " ".join(text.split())
    if value.is_integer():
        return str(int(value))
    return repr(value)


def task_id_for(persona: PersonaRecord, workflow: tuple[WorkflowStep, ...], toolset: tuple[ToolSpec, ...]) -> str:
    """Content-hash id: identical synthesis content gets the same id on rerun."""
    task_probe = {
        "persona": persona_to_obj(persona),
        "workflow": [{"index": s.index, "description": s.description, "expected_tools": list(s.expected_tools)} for s in workflow],
        "toolset": [t.name for t in toolset],
    }
    return content_hash(task_probe)


def _render_workflow(workflow: tuple[WorkflowStep, ...]) -> str:
    return "\n".join(f"{s.index}. {s.description}" for s in workflow)


_SENTENCE_RE = re.compile(r"[.!?\n]+")


def _normalize(text: str) -> str:
    return " ".join(re.sub(r"[^\w\s]", " ", text.casefold()).split())


def _has_information_gap(instruction: str, context: str) -> bool:
    """True when the context holds at least one sentence absent from the
    instruction (normalized containment) — the cheap proxy for 'the
    instruction alone is not enough to act'."""
    norm_instruction = _normalize(instruction)
    for sentence in _SENTENCE_RE.split(context):
        norm = _normalize(sentence)
        if norm and norm not in norm_instruction:
            return True
    return False
