"""Single abstraction over chat-completion backends.

Three backends share one interface: a remote HTTP endpoint, a deterministic
scripted stub, and a record/replay cassette. With the stub or cassette the
entire engine is deterministic — same inputs, same trajectories, same
rewards — which is what makes everything downstream testable offline.
"""

from __future__ import annotations

import json
import logging
import re
import threading
import time
from pathlib import Path
from typing import Any, Callable, Protocol, Sequence

import httpx

from .canonical import canonical_json, content_hash
from .errors import CassetteMiss, ConfigError, ScriptExhausted, TransportError
from .serde import dump_line
from .toolspec import tool_to_function_schema
from .types import ASSISTANT, SYSTEM, TOOL_CALL, TOOL_RESPONSE, USER, ChatRequest, ChatResponse

logger = logging.getLogger(__name__)

# roles on the chat-completions wire
_WIRE_ROLE = {SYSTEM: "system", USER: "user", ASSISTANT: "assistant", TOOL_CALL: "assistant", TOOL_RESPONSE: "tool"}


class Backend(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


def request_to_wire(request: ChatRequest) -> dict[str, Any]:
    body: dict[str, Any] = {
        "model": request.model_tag,
        "messages": [{"role": _WIRE_ROLE[m.role], "content": m.content} for m in request.messages],
        "max_tokens": request.max_tokens,
        "temperature": request.temperature,
    }
    if request.tools:
        body["tools"] = [{"type": "function", "function": tool_to_function_schema(t)} for t in request.tools]
    return body


def request_key(request: ChatRequest) -> str:
    """Content hash identifying a request for cassette lookup."""
    return content_hash(request_to_wire(request), length=32)


def _deterministic_usage(request: ChatRequest, content: str) -> int:
    # rough chars/4 estimate; only needs to be deterministic, not accurate
    prompt_chars = sum(len(m.content) for m in request.messages)
    return (prompt_chars + len(content)) // 4


class StubBackend:
    """Scripted stub: first-match over ordered (regex-on-last-message → response) rules.

    A rule's response may be a single string (matches forever), an ordered
    sequence consumed one response per match (exhausted rules stop matching),
    or a callable ``(ChatRequest) -> str`` for computed fixtures.
    """

    def __init__(self, rules: Sequence[tuple[str, str | Sequence[str] | Callable[[ChatRequest], str]]]):
        self._lock = threading.Lock()
        self._rules: list[tuple[re.Pattern[str], Any, list[str] | None]] = []
        for pattern, response in rules:
            compiled = re.compile(pattern, re.DOTALL)
            if isinstance(response, str) or callable(response):
                self._rules.append((compiled, response, None))
            else:
                self._rules.append((compiled, None, list(response)))

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "StubBackend":
        rules = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                rules.append((obj["pattern"], obj["responses"] if "responses" in obj else obj["response"]))
        return cls(rules)

    def complete(self, request: ChatRequest) -> ChatResponse:
        last = request.last_content()
        with self._lock:
            for compiled, response, queue in self._rules:
                if not compiled.search(last):
                    continue
                if queue is not None:
                    if not queue:
                        continue  # exhausted; fall through to later rules
                    content = queue.pop(0)
                elif callable(response):
                    content = response(request)
                else:
                    content = response
                return ChatResponse(content=content, finish_reason="stop", usage_tokens=_deterministic_usage(request, content))
        raise ScriptExhausted(f"no stub rule matches last message: {last[:160]!r}")


class CassetteBackend:
    """Record/replay cassette keyed by request content hash.

    In record mode every response from the inner backend is persisted; in
    replay mode recorded responses come back bit-exactly and unrecorded
    requests raise :class:`CassetteMiss`.
    """

    def __init__(self, path: str | Path, mode: str = "replay", inner: Backend | None = None):
        if mode not in ("record", "replay"):
            raise ConfigError(f"cassette mode must be record or replay, got {mode!r}")
        if mode == "record" and inner is None:
            raise ConfigError("record mode needs an inner backend")
        self.path = Path(path)
        self.mode = mode
        self.inner = inner
        self._lock = threading.Lock()
        self._entries: dict[str, dict[str, Any]] = {}
        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        obj = json.loads(line)
                        self._entries[obj["key"]] = obj["response"]

    def complete(self, request: ChatRequest) -> ChatResponse:
        key = request_key(request)
        with self._lock:
            hit = self._entries.get(key)
        if hit is not None:
            return ChatResponse(content=hit["content"], finish_reason=hit["finish_reason"], usage_tokens=hit["usage_tokens"])
        if self.mode == "replay":
            raise CassetteMiss(f"no recorded response for request {key}")
        assert self.inner is not None
        response = self.inner.complete(request)
        entry = {
            "content": response.content,
            "finish_reason": response.finish_reason,
            "usage_tokens": response.usage_tokens,
        }
        with self._lock:
            self._entries[key] = entry
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(dump_line({"key": key, "request": request_to_wire(request), "response": entry}))
                fh.write("\n")
        return response


class RemoteBackend:
    """Chat-completions HTTP/JSON endpoint (POST <base_url>/chat/completions)."""

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        timeout_s: float = 120.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self._client = httpx.Client(timeout=timeout_s, transport=transport)
        self._headers = {"Content-Type": "application/json"}
        if api_key:
            self._headers["Authorization"] = f"Bearer {api_key}"

    def complete(self, request: ChatRequest) -> ChatResponse:
        try:
            r = self._client.post(
                f"{self.base_url}/chat/completions", json=request_to_wire(request), headers=self._headers
            )
            r.raise_for_status()
        except httpx.HTTPError as e:
            raise TransportError(str(e)) from e
        data = r.json()
        choice = data.get("choices", [{}])[0]
        content = (choice.get("message") or {}).get("content") or ""
        finish = choice.get("finish_reason") or "stop"
        usage = (data.get("usage") or {}).get("total_tokens") or 0
        return ChatResponse(content=content, finish_reason=finish, usage_tokens=int(usage))


class LLMGateway:
    """Retry, concurrency-cap, and token-accounting wrapper around a backend.

    Transient transport failures are retried with exponential backoff up to
    the configured count; stub/cassette protocol errors (exhausted script,
    cassette miss) are not retried — they are determinism bugs, not faults.
    """

    def __init__(
        self,
        backend: Backend,
        retries: int = 3,
        backoff_s: float = 0.5,
        concurrency: int = 8,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.backend = backend
        self.retries = retries
        self.backoff_s = backoff_s
        self._slots = threading.Semaphore(max(1, concurrency))
        self._sleep = sleep
        self._lock = threading.Lock()
        self._tokens_used = 0

    @property
    def tokens_used(self) -> int:
        """Total usage across the run; accumulates monotonically."""
        with self._lock:
            return self._tokens_used

    def complete(self, request: ChatRequest) -> ChatResponse:
        attempts = self.retries + 1
        last_error: TransportError | None = None
        for attempt in range(1, attempts + 1):
            try:
                with self._slots:
                    response = self.backend.complete(request)
                with self._lock:
                    self._tokens_used += response.usage_tokens
                return response
            except TransportError as e:
                last_error = e
                if attempt < attempts:
                    delay = self.backoff_s * (2 ** (attempt - 1))
                    logger.warning("transport failure (attempt %d/%d), retrying in %.2fs: %s", attempt, attempts, delay, e)
                    self._sleep(delay)
        assert last_error is not None
        raise TransportError(f"gave up after {attempts} attempts: {last_error}")


def build_backend(cfg) -> Backend:
    """Construct the backend named by config."""
    if cfg.backend == "stub":
        if not cfg.stub_script:
            raise ConfigError("backend=stub requires stub_script")
        return StubBackend.from_jsonl(cfg.stub_script)
    if cfg.backend == "remote":
        return RemoteBackend(cfg.base_url, api_key=cfg.api_key(), timeout_s=cfg.request_timeout_s)
    if cfg.backend == "cassette":
        if not cfg.cassette_path:
            raise ConfigError("backend=cassette requires cassette_path")
        inner = None
        if cfg.cassette_mode == "record":
            inner = RemoteBackend(cfg.base_url, api_key=cfg.api_key(), timeout_s=cfg.request_timeout_s)
        return CassetteBackend(cfg.cassette_path, mode=cfg.cassette_mode, inner=inner)
    raise ConfigError(f"unknown backend {cfg.backend!r}")


def build_gateway(cfg) -> LLMGateway:
    return LLMGateway(
        build_backend(cfg),
        retries=cfg.retries,
        backoff_s=cfg.retry_backoff_s,
        concurrency=cfg.concurrency,
    )
