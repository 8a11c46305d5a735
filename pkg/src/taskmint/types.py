"""Domain value types.

Everything here is an immutable value: construction validates the type's
invariants, after which instances are safe to share across threads and
sessions without coordination. Serialized forms live in :mod:`taskmint.serde`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Union

from .canonical import canonical_args, call_signature
from .errors import (
    BadIdentifier,
    DuplicateParameter,
    DuplicateToolName,
    MissingField,
    SchemaError,
    UnknownSemanticType,
    UnknownTool,
)

IDENTIFIER_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

SEMANTIC_TYPES = frozenset({"string", "number", "integer", "boolean", "array", "object"})

# message roles
SYSTEM = "system"
USER = "user"
ASSISTANT = "assistant"
TOOL_CALL = "tool_call"
TOOL_RESPONSE = "tool_response"
ROLES = frozenset({SYSTEM, USER, ASSISTANT, TOOL_CALL, TOOL_RESPONSE})

# trajectory termination reasons
ANSWERED = "answered"
TURN_LIMIT = "turn_limit"
ERROR = "error"
TERMINATION_REASONS = frozenset({ANSWERED, TURN_LIMIT, ERROR})

# env reply kinds
REPLY_TOOL = "tool_response"
REPLY_USER = "user_reply"
REPLY_TERMINAL = "terminal"


@dataclass(frozen=True)
class PersonaRecord:
    """Identity plus scenario background that seeds one synthesized task."""

    id: str
    description: str

    def __post_init__(self):
        if not self.description.strip():
            raise SchemaError("persona description must be non-empty", "$.description")


@dataclass(frozen=True)
class WorkflowStep:
    index: int  # 1-based within its workflow
    description: str
    expected_tools: tuple[str, ...] = ()

    def __post_init__(self):
        if self.index < 1:
            raise SchemaError("step index must be >= 1", "$.index")
        if not self.description.strip():
            raise SchemaError("step description must be non-empty", "$.description")


def check_workflow(steps: Iterable[WorkflowStep]) -> tuple[WorkflowStep, ...]:
    """Validate that step indices are contiguous 1..n and unique."""
    out = tuple(steps)
    indices = [s.index for s in out]
    if indices != list(range(1, len(out) + 1)):
        raise SchemaError(f"workflow indices must be contiguous 1..{len(out)}, got {indices}", "$.workflow")
    return out


@dataclass(frozen=True)
class ParameterSpec:
    name: str
    semantic_type: str
    description: str = ""
    required: bool = True

    def __post_init__(self):
        if not IDENTIFIER_RE.match(self.name):
            raise BadIdentifier(f"parameter name {self.name!r} is not an identifier", "$.name")
        if self.semantic_type not in SEMANTIC_TYPES:
            raise UnknownSemanticType(
                f"{self.semantic_type!r} is not one of {sorted(SEMANTIC_TYPES)}", "$.semantic_type"
            )


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    parameters: tuple[ParameterSpec, ...] = ()

    def __post_init__(self):
        if not IDENTIFIER_RE.match(self.name):
            raise BadIdentifier(f"tool name {self.name!r} is not an identifier", "$.name")
        seen: set[str] = set()
        for p in self.parameters:
            if p.name in seen:
                raise DuplicateParameter(f"parameter {p.name!r} declared twice", f"$.parameters.{p.name}")
            seen.add(p.name)

    @property
    def required_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.parameters if p.required)


@dataclass(frozen=True)
class ForbiddenConstraint:
    """A prohibited behavior and what counts as violating it."""

    description: str

    def __post_init__(self):
        if not self.description.strip():
            raise SchemaError("forbidden constraint must be non-empty", "$.description")


def check_toolset(toolset: Iterable[ToolSpec]) -> tuple[ToolSpec, ...]:
    out = tuple(toolset)
    seen: set[str] = set()
    for t in out:
        if t.name in seen:
            raise DuplicateToolName(f"tool {t.name!r} declared twice in toolset", f"$.toolset.{t.name}")
        seen.add(t.name)
    return out


@dataclass(frozen=True)
class SynthTask:
    """A complete synthesized unit: who, what, with which tools, under which
    constraints — split into the agent-visible instruction and the
    user-private hidden context."""

    task_id: str
    persona: PersonaRecord
    workflow: tuple[WorkflowStep, ...]
    toolset: tuple[ToolSpec, ...]
    forbidden: tuple[ForbiddenConstraint, ...]
    instruction: str
    hidden_context: str

    def __post_init__(self):
        object.__setattr__(self, "workflow", check_workflow(self.workflow))
        object.__setattr__(self, "toolset", check_toolset(self.toolset))
        if not self.toolset:
            raise MissingField("toolset must be non-empty", "$.toolset")
        if not self.instruction.strip():
            raise MissingField("instruction must be non-empty", "$.instruction")

    def tool_names(self) -> set[str]:
        return {t.name for t in self.toolset}

    def tool(self, name: str) -> ToolSpec:
        for t in self.toolset:
            if t.name == name:
                return t
        raise KeyError(name)


@dataclass(frozen=True, eq=False)
class CanonicalCall:
    """A tool invocation normalized for exact-equality lookup.

    Construction canonicalizes, so ``CanonicalCall(t, a)`` is always in
    canonical form and re-canonicalizing is the identity.
    """

    tool: str
    args: dict[str, Any]

    def __post_init__(self):
        tool = self.tool.strip()
        if not tool:
            raise SchemaError("tool name must be non-empty", "$.tool")
        object.__setattr__(self, "tool", tool)
        object.__setattr__(self, "args", canonical_args(self.args))

    @property
    def signature(self) -> str:
        return call_signature(self.tool, self.args)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, CanonicalCall) and self.signature == other.signature

    def __hash__(self) -> int:
        return hash(self.signature)

    def render(self) -> str:
        """Human-readable one-line form used in prompts and transcripts."""
        parts = ", ".join(f"{k}={v!r}" for k, v in self.args.items())
        return f"{self.tool}({parts})"


def canonicalize_call(tool: str, args: dict[str, Any], toolset: Iterable[ToolSpec] | None = None) -> CanonicalCall:
    """Build the canonical form of a call, optionally checking tool membership.

    Equal inputs modulo key order, string edge-whitespace, and number
    formatting yield identical results; the operation is idempotent.
    """
    if toolset is not None:
        names = {t.name for t in toolset}
        if tool.strip() not in names:
            raise UnknownTool(f"tool {tool.strip()!r} is not in the active toolset {sorted(names)}")
    return CanonicalCall(tool=tool, args=args)


@dataclass(frozen=True)
class Message:
    role: str
    content: str
    call: CanonicalCall | None = None
    turn: int = 0

    def __post_init__(self):
        if self.role not in ROLES:
            raise SchemaError(f"unknown role {self.role!r}", "$.role")
        if (self.role == TOOL_CALL) != (self.call is not None):
            raise SchemaError("call is required exactly when role is tool_call", "$.call")
        if self.turn < 0:
            raise SchemaError("turn must be >= 0", "$.turn")


def check_transcript(messages: Iterable[Message]) -> tuple[Message, ...]:
    """Enforce message ordering: strictly increasing turns, tool responses
    immediately after their tool call."""
    out = tuple(messages)
    prev_turn = -1
    for i, m in enumerate(out):
        if m.turn <= prev_turn:
            raise SchemaError(f"turn {m.turn} at position {i} not strictly increasing", f"$.messages[{i}]")
        prev_turn = m.turn
        if m.role == TOOL_RESPONSE and (i == 0 or out[i - 1].role != TOOL_CALL):
            raise SchemaError("tool_response must immediately follow a tool_call", f"$.messages[{i}]")
    return out


@dataclass(frozen=True)
class Trajectory:
    """Ordered multi-turn transcript of one rollout plus its terminal state."""

    task_id: str
    messages: tuple[Message, ...]
    final_answer: str | None = None
    terminated_reason: str = ANSWERED

    def __post_init__(self):
        object.__setattr__(self, "messages", check_transcript(self.messages))
        if self.terminated_reason not in TERMINATION_REASONS:
            raise SchemaError(f"unknown termination reason {self.terminated_reason!r}", "$.terminated_reason")

    def assistant_turns(self) -> int:
        return sum(1 for m in self.messages if m.role in (ASSISTANT, TOOL_CALL))

    def user_interactions(self) -> int:
        """Number of agent-directed user replies (excludes the opening ask)."""
        return sum(1 for m in self.messages[2:] if m.role == USER)


@dataclass(frozen=True)
class Rubric:
    task_id: str
    forbidden: tuple[ForbiddenConstraint, ...]
    subgoals: tuple[str, ...]
    required_interactions: tuple[str, ...]

    def __post_init__(self):
        if any(not s.strip() for s in self.subgoals):
            raise SchemaError("subgoals must be non-empty strings", "$.subgoals")
        if any(not s.strip() for s in self.required_interactions):
            raise SchemaError("required interactions must be non-empty strings", "$.required_interactions")


@dataclass(frozen=True)
class RewardReport:
    """Gate flag plus the two rubric fractions and the final scalar reward.

    Fractions are exact rationals; ``reward == gate * (subgoals + interactions) / 2``
    holds by construction, so a zero gate annihilates the reward.
    """

    gate: int
    subgoal_fraction: Fraction
    interaction_fraction: Fraction
    reward: Fraction

    def __post_init__(self):
        if self.gate not in (0, 1):
            raise SchemaError("gate must be 0 or 1", "$.gate")
        for name in ("subgoal_fraction", "interaction_fraction"):
            v = getattr(self, name)
            if not (0 <= v <= 1):
                raise SchemaError(f"{name} must lie in [0,1]", f"$.{name}")
        expected = self.gate * (self.subgoal_fraction + self.interaction_fraction) / 2
        if self.reward != expected:
            raise SchemaError(f"reward {self.reward} != gate*(s+i)/2 = {expected}", "$.reward")

    @classmethod
    def from_components(cls, gate: int, subgoal_fraction: Fraction, interaction_fraction: Fraction) -> "RewardReport":
        return cls(
            gate=gate,
            subgoal_fraction=subgoal_fraction,
            interaction_fraction=interaction_fraction,
            reward=gate * (subgoal_fraction + interaction_fraction) / 2,
        )


@dataclass(frozen=True)
class CoverageReport:
    """Per-trajectory executed/unexecuted flags for each workflow step."""

    task_id: str
    per_trajectory: tuple[dict[int, bool], ...]
    best_coverage_fraction: Fraction

    def __post_init__(self):
        fractions = [
            Fraction(sum(1 for done in marks.values() if done), len(marks)) if marks else Fraction(0)
            for marks in self.per_trajectory
        ]
        best = max(fractions, default=Fraction(0))
        if self.best_coverage_fraction != best:
            raise SchemaError(
                f"best_coverage_fraction {self.best_coverage_fraction} != max over trajectories {best}", "$"
            )


@dataclass(frozen=True)
class ReasoningTask:
    problem: str
    answer: str
    scenario_variant: str = ""

    def __post_init__(self):
        if not self.answer.strip():
            raise SchemaError("answer must be non-empty", "$.answer")


@dataclass(frozen=True)
class RejectionRecord:
    """Machine-readable account of why synthesis dropped a persona."""

    persona_id: str
    stage: str
    reason: str


@dataclass(frozen=True)
class SynthesisOutcome:
    result: Union[SynthTask, RejectionRecord]
    tokens_spent: int = 0

    @property
    def accepted(self) -> bool:
        return isinstance(self.result, SynthTask)


@dataclass(frozen=True)
class EnvReply:
    """One environment response to an agent step."""

    kind: str  # tool_response | user_reply | terminal
    content: str
    map_hit: bool | None = None
    reason: str | None = None

    def __post_init__(self):
        if self.kind not in (REPLY_TOOL, REPLY_USER, REPLY_TERMINAL):
            raise SchemaError(f"unknown reply kind {self.kind!r}", "$.kind")
        if self.kind == REPLY_TERMINAL and not self.reason:
            raise SchemaError("terminal replies must carry the termination reason", "$.reason")
        if self.kind != REPLY_TOOL and self.map_hit is not None:
            raise SchemaError("map_hit only applies to tool responses", "$.map_hit")


@dataclass(frozen=True)
class ChatRequest:
    model_tag: str
    messages: tuple[Message, ...]
    max_tokens: int = 1024
    temperature: float = 0.0
    tools: tuple[ToolSpec, ...] = ()

    def __post_init__(self):
        if not self.messages:
            raise SchemaError("messages must be non-empty", "$.messages")
        if self.max_tokens <= 0:
            raise SchemaError("max_tokens must be positive", "$.max_tokens")
        if self.temperature < 0:
            raise SchemaError("temperature must be >= 0", "$.temperature")

    def last_content(self) -> str:
        return self.messages[-1].content


@dataclass(frozen=True)
class ChatResponse:
    content: str
    finish_reason: str = "stop"  # stop | length | tool_call
    usage_tokens: int = 0

    def __post_init__(self):
        if self.usage_tokens < 0:
            raise SchemaError("usage_tokens must be >= 0", "$.usage_tokens")
