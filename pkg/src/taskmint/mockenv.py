"""LLM-simulated mock environment: tools, user, turn limits.

One environment serves many concurrent sessions. Each session is bound to a
consistency map — the per-task append-only table of (canonical call →
response) pairs that makes tool behavior reproducible across the repeated
attempts of one rollout group. Exact canonical matches short-circuit without
any simulator call; otherwise the simulator sees the whole map in its prompt
and either designates an equivalent prior entry or produces a fresh response
that is then committed to the map.
"""

from __future__ import annotations

import json
import logging
import re
import threading
import uuid
from dataclasses import dataclass, field

from . import prompts
from .canonical import canonical_json
from .config import EngineConfig
from .errors import MalformedToolCall, SchemaError, SessionTerminated, SimulatorParseFailure
from .gateway import LLMGateway
from .serde import call_to_obj
from .toolspec import tool_to_function_schema
from .types import (
    ANSWERED,
    ASSISTANT,
    ERROR,
    REPLY_TERMINAL,
    REPLY_TOOL,
    REPLY_USER,
    SYSTEM,
    TOOL_CALL,
    TOOL_RESPONSE,
    TURN_LIMIT,
    USER,
    CanonicalCall,
    ChatRequest,
    EnvReply,
    Message,
    SynthTask,
    Trajectory,
    canonicalize_call,
)

logger = logging.getLogger(__name__)

ANSWER_RE = re.compile(r"<answer>(.*?)</answer>", re.DOTALL)
TOOL_CALL_RE = re.compile(r"<tool_call>(.*?)</tool_call>", re.DOTALL)

# structural marker recorded when tool-call markup cannot be interpreted,
# so the transcript still satisfies the tool_call/tool_response pairing
MALFORMED_TOOL = "malformed_tool_call"

# map scope: a group id shares one consistency map across all its sessions;
# None gives the session a private fresh map
MapScope = str | None


class ConsistencyMap:
    """Append-only, duplicate-free table of (canonical call, response) pairs.

    Appends are atomic check-then-append: if the call is already present the
    existing response wins, so concurrent sessions of one task can never
    commit two responses for the same canonical call.
    """

    def __init__(self, task_id: str):
        self.task_id = task_id
        self._lock = threading.Lock()
        self._entries: list[tuple[CanonicalCall, str]] = []
        self._index: dict[str, int] = {}

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def entries(self) -> list[tuple[CanonicalCall, str]]:
        with self._lock:
            return list(self._entries)

    def lookup(self, call: CanonicalCall) -> str | None:
        with self._lock:
            i = self._index.get(call.signature)
            return self._entries[i][1] if i is not None else None

    def response_at(self, index: int) -> str:
        with self._lock:
            return self._entries[index][1]

    def append(self, call: CanonicalCall, response: str) -> tuple[str, bool]:
        """Commit (call, response); returns (stored response, freshly_added)."""
        with self._lock:
            i = self._index.get(call.signature)
            if i is not None:
                return self._entries[i][1], False
            self._index[call.signature] = len(self._entries)
            self._entries.append((call, response))
            return response, True

    def to_obj(self) -> dict:
        return {
            "task_id": self.task_id,
            "entries": [{"call": call_to_obj(c), "response": r} for c, r in self.entries()],
        }


class MapStore:
    """Holds the consistency maps, keyed by (task_id, group_id)."""

    def __init__(self):
        self._lock = threading.Lock()
        self._maps: dict[tuple[str, str], ConsistencyMap] = {}

    def get(self, task_id: str, scope: MapScope) -> ConsistencyMap:
        if scope is None:
            return ConsistencyMap(task_id)  # private, never shared
        with self._lock:
            key = (task_id, scope)
            if key not in self._maps:
                self._maps[key] = ConsistencyMap(task_id)
            return self._maps[key]

    def all_maps(self) -> dict[tuple[str, str], ConsistencyMap]:
        with self._lock:
            return dict(self._maps)


# session status values
ACTIVE = "active"
DONE_ANSWERED = "done_answered"
DONE_TURN_LIMIT = "done_turn_limit"
DONE_ERROR = "done_error"

_STATUS_TO_REASON = {DONE_ANSWERED: ANSWERED, DONE_TURN_LIMIT: TURN_LIMIT, DONE_ERROR: ERROR}


@dataclass
class Session:
    session_id: str
    task: SynthTask
    consistency_map: ConsistencyMap
    max_turns: int
    transcript: list[Message] = field(default_factory=list)
    turns_used: int = 0
    status: str = ACTIVE
    final_answer: str | None = None

    @property
    def active(self) -> bool:
        return self.status == ACTIVE

    @property
    def turns_remaining(self) -> int:
        return max(0, self.max_turns - self.turns_used)

    @property
    def system_prompt(self) -> str:
        return self.transcript[0].content

    def next_turn(self) -> int:
        return self.transcript[-1].turn + 1 if self.transcript else 0

    def to_trajectory(self) -> Trajectory:
        return Trajectory(
            task_id=self.task.task_id,
            messages=tuple(self.transcript),
            final_answer=self.final_answer,
            terminated_reason=_STATUS_TO_REASON.get(self.status, ERROR),
        )


def build_system_prompt(task: SynthTask) -> str:
    """Agent-visible system prompt: toolset, constraints, instruction. Never C."""
    toolset_json = "\n".join(canonical_json(tool_to_function_schema(t)) for t in task.toolset)
    forbidden = "\n".join(f"- {c.description}" for c in task.forbidden) or "- (none)"
    return prompts.render(
        "agent_system",
        instruction=task.instruction,
        toolset_json=toolset_json,
        forbidden=forbidden,
    )


def render_transcript(messages: list[Message] | tuple[Message, ...], include_system: bool = False) -> str:
    """Plain-text rendering used inside simulator and judge prompts."""
    label = {SYSTEM: "System", USER: "User", ASSISTANT: "Assistant", TOOL_CALL: "Assistant (tool call)", TOOL_RESPONSE: "Tool"}
    lines = []
    for m in messages:
        if m.role == SYSTEM and not include_system:
            continue
        lines.append(f"{label[m.role]}: {m.content}")
    return "\n".join(lines)


def parse_agent_message(text: str) -> tuple[str, CanonicalCall | None, str | None]:
    """Classify an agent message: ('answer', None, answer_text),
    ('tool_call', call, None), or ('question', None, None).

    Raises :class:`MalformedToolCall` when tool-call markup is present but
    cannot be interpreted.
    """
    answer = ANSWER_RE.search(text)
    if answer:
        return "answer", None, answer.group(1).strip()
    markup = TOOL_CALL_RE.search(text)
    if markup:
        try:
            payload = json.loads(markup.group(1))
        except json.JSONDecodeError as e:
            raise MalformedToolCall(f"tool_call body is not valid JSON: {e.msg}")
        if not isinstance(payload, dict) or not isinstance(payload.get("tool"), str):
            raise MalformedToolCall("tool_call body must be an object with a 'tool' name")
        args = payload.get("args", {})
        if not isinstance(args, dict):
            raise MalformedToolCall("'args' must be an object")
        return "tool_call", CanonicalCall(tool=payload["tool"], args=args), None
    return "question", None, None


class MockEnvironment:
    """Runs multi-turn sessions against synthesized tasks."""

    def __init__(self, config: EngineConfig, gateway: LLMGateway, map_store: MapStore | None = None):
        self.config = config
        self.gateway = gateway
        self.map_store = map_store or MapStore()
        self._counters: dict[tuple[str, str], int] = {}
        self._counter_lock = threading.Lock()

    def _next_session_id(self, task_id: str, scope: MapScope) -> str:
        # deterministic ids for scoped sessions keep stub reruns byte-identical
        if scope is None:
            return uuid.uuid4().hex[:16]
        with self._counter_lock:
            key = (task_id, scope)
            n = self._counters.get(key, 0)
            self._counters[key] = n + 1
        return f"{task_id[:8]}-{scope}-{n:04d}"

    def reset(self, task: SynthTask, scope: MapScope = None) -> Session:
        """Open a session: system prompt with toolset + instruction, then the
        instruction as the opening user message. The consistency map for
        (task, scope) is attached — created empty if absent, reused if the
        scope already holds one. With persist_maps on, all scoped sessions of
        a task share one map across rollout groups."""
        map_scope = scope
        if scope is not None and self.config.persist_maps:
            map_scope = "__persistent__"
        system_prompt = build_system_prompt(task)
        if task.hidden_context and task.hidden_context in system_prompt:
            raise SchemaError("hidden context must never appear in the agent-visible system prompt", "$.hidden_context")
        session = Session(
            session_id=self._next_session_id(task.task_id, scope),
            task=task,
            consistency_map=self.map_store.get(task.task_id, map_scope),
            max_turns=self.config.max_turns,
        )
        session.transcript.append(Message(role=SYSTEM, content=system_prompt, turn=0))
        session.transcript.append(Message(role=USER, content=task.instruction, turn=1))
        return session

    def step(self, session: Session, agent_text: str) -> EnvReply:
        """Advance the session by one agent turn and return the environment reply."""
        if not session.active:
            raise SessionTerminated(f"session {session.session_id} is {session.status}")
        session.turns_used += 1

        try:
            kind, call, answer = parse_agent_message(agent_text)
        except MalformedToolCall as e:
            session.transcript.append(
                Message(
                    role=TOOL_CALL,
                    content=agent_text,
                    call=CanonicalCall(tool=MALFORMED_TOOL, args={"raw_text": agent_text[:2000]}),
                    turn=session.next_turn(),
                )
            )
            return self._tool_error_reply(session, f"Error: malformed tool call ({e}). Fix the format and retry.")

        if kind == "answer":
            session.transcript.append(Message(role=ASSISTANT, content=agent_text, turn=session.next_turn()))
            session.status = DONE_ANSWERED
            session.final_answer = answer
            return EnvReply(kind=REPLY_TERMINAL, content=answer or "", reason=ANSWERED)

        if kind == "tool_call":
            assert call is not None
            session.transcript.append(Message(role=TOOL_CALL, content=agent_text, call=call, turn=session.next_turn()))
            if call.tool not in session.task.tool_names():
                return self._finish_or_reply(
                    session,
                    lambda: self._tool_error_reply(session, f"Error: unknown tool {call.tool!r}."),
                )
            return self._finish_or_reply(session, lambda: self._tool_reply(session, call))

        session.transcript.append(Message(role=ASSISTANT, content=agent_text, turn=session.next_turn()))
        return self._finish_or_reply(session, lambda: self._user_reply(session, agent_text))

    def _finish_or_reply(self, session: Session, reply) -> EnvReply:
        # the turn budget is spent by assistant turns; when the budget is
        # exhausted and the agent still has not answered, the episode ends
        if session.turns_used >= session.max_turns:
            session.status = DONE_TURN_LIMIT
            return EnvReply(kind=REPLY_TERMINAL, content="Turn limit reached.", reason=TURN_LIMIT)
        return reply()

    def _tool_error_reply(self, session: Session, text: str) -> EnvReply:
        if session.turns_used >= session.max_turns:
            session.status = DONE_TURN_LIMIT
            return EnvReply(kind=REPLY_TERMINAL, content="Turn limit reached.", reason=TURN_LIMIT)
        session.transcript.append(Message(role=TOOL_RESPONSE, content=text, turn=session.next_turn()))
        return EnvReply(kind=REPLY_TOOL, content=text, map_hit=False)

    def _tool_reply(self, session: Session, call: CanonicalCall) -> EnvReply:
        try:
            response, map_hit = self.simulate_tool(session, call)
        except SimulatorParseFailure as e:
            return self._tool_error_reply(session, f"Error: tool execution failed ({e}).")
        session.transcript.append(Message(role=TOOL_RESPONSE, content=response, turn=session.next_turn()))
        return EnvReply(kind=REPLY_TOOL, content=response, map_hit=map_hit)

    def _user_reply(self, session: Session, question: str) -> EnvReply:
        reply = self.simulate_user(session, question)
        session.transcript.append(Message(role=USER, content=reply, turn=session.next_turn()))
        return EnvReply(kind=REPLY_USER, content=reply)

    # -- simulators ---------------------------------------------------------

    def simulate_tool(self, session: Session, call: CanonicalCall) -> tuple[str, bool]:
        """Resolve one tool call against the consistency map.

        Exact canonical matches return the stored response without any
        simulator call. Otherwise the simulator sees the full map in a single
        prompt and must answer ``MATCH <n>`` (reuse entry n verbatim) or
        ``NEW`` followed by a fresh response, which is then committed.
        """
        canonical = canonicalize_call(call.tool, call.args, session.task.toolset)
        cmap = session.consistency_map

        stored = cmap.lookup(canonical)
        if stored is not None:
            return stored, True

        entries = cmap.entries()
        prompt = prompts.render(
            "tool_simulator",
            tool_json=canonical_json(tool_to_function_schema(session.task.tool(canonical.tool))),
            map_entries="\n".join(f"[{i}] {c.render()} -> {r}" for i, (c, r) in enumerate(entries)) or "(none yet)",
            call=canonical.render(),
        )
        failure: SimulatorParseFailure | None = None
        for _ in range(self.config.stage_attempts):
            response = self.gateway.complete(self._sim_request(prompt))
            try:
                return self._apply_simulator_verdict(cmap, canonical, entries, response.content)
            except SimulatorParseFailure as e:
                failure = e
        raise failure if failure is not None else SimulatorParseFailure("simulator produced no output")

    def _apply_simulator_verdict(
        self,
        cmap: ConsistencyMap,
        call: CanonicalCall,
        entries: list[tuple[CanonicalCall, str]],
        verdict: str,
    ) -> tuple[str, bool]:
        text = verdict.strip()
        match = re.match(r"^MATCH\s+(\d+)\s*$", text.splitlines()[0] if text else "")
        if match:
            idx = int(match.group(1))
            if idx >= len(entries):
                raise SimulatorParseFailure(f"MATCH index {idx} out of range (map has {len(entries)} entries)")
            return entries[idx][1], True
        if text.startswith("NEW"):
            body = text[3:].lstrip("\n").strip()
            if not body:
                raise SimulatorParseFailure("NEW verdict without a response body")
            stored, _ = cmap.append(call, body)
            return stored, False
        raise SimulatorParseFailure(f"expected 'MATCH <n>' or 'NEW', got {text[:80]!r}")

    def simulate_user(self, session: Session, question: str) -> str:
        """Answer an agent question from the hidden context only."""
        prompt = prompts.render(
            "user_simulator",
            hidden_context=session.task.hidden_context,
            transcript=render_transcript(session.transcript),
            question=question,
        )
        try:
            response = self.gateway.complete(self._sim_request(prompt))
        except Exception as e:  # any gateway failure degrades to a shrug
            logger.warning("user simulator failed (%s); falling back", e)
            return "I'm not sure."
        reply = response.content.strip()
        return reply if reply else "I'm not sure."

    def _sim_request(self, prompt: str) -> ChatRequest:
        return ChatRequest(
            model_tag=self.config.simulator_model,
            messages=(Message(role=USER, content=prompt, turn=0),),
            max_tokens=self.config.max_response_tokens,
            temperature=0.0,
        )
