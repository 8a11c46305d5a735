"""Rollout service: task registration, session reset/step, judging, stats.

Wire protocol: HTTP/JSON, every response body carries either ``result`` or
``error`` (``{code, message}``), never both. Sessions are in-memory; sessions
sharing a ``group_id`` share one consistency map. The service never puts a
task's hidden context into any agent-facing response body — agents see only
the system prompt, the instruction, and environment replies.
"""

from __future__ import annotations

import logging
import threading
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import PROTOCOL_VERSION
from .config import EngineConfig
from .errors import SchemaError, SessionTerminated
from .gateway import LLMGateway
from .mockenv import MapStore, MockEnvironment, Session
from .reward import RewardJudge
from .serde import (
    reward_report_to_obj,
    rubric_from_obj,
    task_from_obj,
    trajectory_from_obj,
    trajectory_to_obj,
    write_records,
)
from .stats import compute_stats
from .types import REPLY_TERMINAL, Rubric, SynthTask

logger = logging.getLogger(__name__)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class ServiceState:
    """Registered corpus plus live sessions."""

    def __init__(self, config: EngineConfig, gateway: LLMGateway):
        self.config = config
        self.gateway = gateway
        self.env = MockEnvironment(config, gateway, MapStore())
        self.judge = RewardJudge(config, gateway)
        self.tasks: dict[str, SynthTask] = {}
        self.rubrics: dict[str, Rubric] = {}
        self.sessions: dict[str, Session] = {}
        self._registry_lock = threading.Lock()
        self._step_locks: dict[str, threading.Lock] = {}

    # -- registration --------------------------------------------------------

    def register(self, tasks: list[SynthTask], rubrics: list[Rubric]) -> list[str]:
        with self._registry_lock:
            for task in tasks:
                existing = self.tasks.get(task.task_id)
                if existing is not None and existing != task:
                    raise ApiError(409, "conflicting_content", f"task {task.task_id} already registered with different content")
            known = set(self.tasks) | {t.task_id for t in tasks}
            for rubric in rubrics:
                if rubric.task_id not in known:
                    raise ApiError(400, "validation_error", f"rubric references unregistered task {rubric.task_id}")
                existing_rubric = self.rubrics.get(rubric.task_id)
                if existing_rubric is not None and existing_rubric != rubric:
                    raise ApiError(409, "conflicting_content", f"rubric for {rubric.task_id} already registered with different content")
            for task in tasks:
                self.tasks[task.task_id] = task
            for rubric in rubrics:
                self.rubrics[rubric.task_id] = rubric
        return [t.task_id for t in tasks]

    # -- sessions -------------------------------------------------------------

    def open_session(self, task_id: str, group_id: str | None) -> Session:
        task = self.tasks.get(task_id)
        if task is None:
            raise ApiError(404, "unknown_task", f"no task registered under {task_id}")
        session = self.env.reset(task, group_id)
        with self._registry_lock:
            self.sessions[session.session_id] = session
            self._step_locks[session.session_id] = threading.Lock()
        return session

    def get_session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise ApiError(404, "unknown_session", f"no session {session_id}")
        return session

    def step_session(self, session_id: str, agent_message: str) -> dict[str, Any]:
        session = self.get_session(session_id)
        lock = self._step_locks[session_id]
        if not lock.acquire(blocking=False):
            raise ApiError(409, "step_in_flight", f"session {session_id} already has a step in flight")
        try:
            if not session.active:
                raise ApiError(409, "session_terminated", f"session {session_id} is {session.status}")
            try:
                reply = self.env.step(session, agent_message)
            except SessionTerminated as e:
                raise ApiError(409, "session_terminated", str(e))
            body: dict[str, Any] = {
                "kind": reply.kind,
                "content": reply.content,
                "turns_remaining": session.turns_remaining,
            }
            if reply.kind == "tool_response":
                body["map_hit"] = reply.map_hit
            if reply.kind == REPLY_TERMINAL:
                body["reason"] = reply.reason
            return body
        finally:
            lock.release()

    # -- judging ----------------------------------------------------------------

    def judge_body(self, body: dict[str, Any]) -> dict[str, Any]:
        if "session_id" in body:
            session = self.get_session(str(body["session_id"]))
            trajectory = session.to_trajectory()
        elif "trajectory" in body:
            try:
                trajectory = trajectory_from_obj(body["trajectory"])
            except SchemaError as e:
                raise ApiError(400, "validation_error", str(e))
        else:
            raise ApiError(400, "validation_error", "judge body needs session_id or trajectory")
        rubric = self.rubrics.get(trajectory.task_id)
        if rubric is None:
            raise ApiError(404, "unknown_rubric", f"no rubric registered for task {trajectory.task_id}")
        report = self.judge.compute_reward(trajectory, rubric)
        return reward_report_to_obj(report)

    # -- stats -----------------------------------------------------------------

    def stats(self) -> dict[str, Any]:
        terminal = [s.to_trajectory() for s in self.sessions.values() if not s.active]
        sizes = [len(m) for m in self.env.map_store.all_maps().values()]
        return compute_stats(
            tasks=self.tasks.values(),
            trajectories=terminal,
            map_sizes=sizes,
            total_tokens=self.gateway.tokens_used,
        )

    # -- persistence -------------------------------------------------------------

    def snapshot(self, directory: str | Path) -> None:
        """Best-effort dump of sessions (as trajectories) and map sizes."""
        directory = Path(directory)
        write_records(directory / "trajectories.jsonl", [s.to_trajectory() for s in self.sessions.values()], trajectory_to_obj)
        write_records(directory / "maps.jsonl", list(self.env.map_store.all_maps().values()), lambda m: m.to_obj())


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="taskmint rollout service", version=PROTOCOL_VERSION)
    app.state.engine = state

    def ok(result: Any, status: int = 200) -> JSONResponse:
        return JSONResponse({"result": result}, status_code=status)

    @app.exception_handler(ApiError)
    async def handle_api_error(_: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse({"error": {"code": exc.code, "message": exc.message}}, status_code=exc.status)

    async def read_body(request: Request) -> dict[str, Any]:
        try:
            body = await request.json()
        except Exception:
            raise ApiError(400, "validation_error", "request body must be JSON")
        if not isinstance(body, dict):
            raise ApiError(400, "validation_error", "request body must be a JSON object")
        return body

    @app.get("/version")
    async def version() -> JSONResponse:
        return ok({"protocol_version": PROTOCOL_VERSION})

    @app.post("/tasks")
    async def register_tasks(request: Request) -> JSONResponse:
        body = await read_body(request)
        try:
            tasks = [task_from_obj(t) for t in body.get("tasks", [])]
            rubrics = [rubric_from_obj(r) for r in body.get("rubrics", [])]
        except SchemaError as e:
            raise ApiError(400, "validation_error", str(e))
        task_ids = state.register(tasks, rubrics)
        return ok({"task_ids": task_ids})

    @app.post("/sessions")
    async def open_session(request: Request) -> JSONResponse:
        body = await read_body(request)
        task_id = body.get("task_id")
        if not isinstance(task_id, str):
            raise ApiError(400, "validation_error", "task_id is required")
        group_id = body.get("group_id")
        if group_id is not None and not isinstance(group_id, str):
            raise ApiError(400, "validation_error", "group_id must be a string when present")
        session = state.open_session(task_id, group_id)
        return ok(
            {
                "session_id": session.session_id,
                "system_prompt": session.system_prompt,
                "instruction": session.task.instruction,
                "turns_remaining": session.turns_remaining,
            }
        )

    @app.post("/sessions/{session_id}/step")
    async def step(session_id: str, request: Request) -> JSONResponse:
        body = await read_body(request)
        message = body.get("agent_message")
        if not isinstance(message, str):
            raise ApiError(400, "validation_error", "agent_message is required")
        return ok(state.step_session(session_id, message))

    @app.post("/judge")
    async def judge(request: Request) -> JSONResponse:
        body = await read_body(request)
        return ok(state.judge_body(body))

    @app.get("/stats")
    async def stats() -> JSONResponse:
        return ok(state.stats())

    return app


def serve(config: EngineConfig, gateway: LLMGateway) -> None:
    """Run the service under uvicorn until interrupted."""
    import uvicorn

    app = create_app(ServiceState(config, gateway))
    uvicorn.run(app, host=config.bind_host, port=config.bind_port, log_level="info")
