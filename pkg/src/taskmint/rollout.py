"""Agent episode loop: drive an LLM policy against the mock environment.

Used both for teacher demonstrations (rubric grounding) and for policy
rollouts; the agent is just a model tag on the gateway, so a scripted stub
makes the whole episode deterministic.
"""

from __future__ import annotations

import logging

from .config import EngineConfig
from .gateway import LLMGateway
from .mockenv import DONE_ERROR, MapScope, MockEnvironment, Session
from .types import REPLY_TERMINAL, ChatRequest, SynthTask, Trajectory

logger = logging.getLogger(__name__)


def run_episode(
    env: MockEnvironment,
    gateway: LLMGateway,
    task: SynthTask,
    model_tag: str,
    scope: MapScope = None,
    temperature: float = 0.0,
) -> Trajectory:
    """Run one complete episode and return its trajectory.

    Gateway failures mid-episode terminate the session with reason ``error``
    rather than propagating — a failed rollout is still a recorded rollout.
    """
    session = env.reset(task, scope)
    return continue_episode(env, gateway, session, model_tag, temperature)


def continue_episode(
    env: MockEnvironment,
    gateway: LLMGateway,
    session: Session,
    model_tag: str,
    temperature: float = 0.0,
) -> Trajectory:
    cfg: EngineConfig = env.config
    while session.active:
        request = ChatRequest(
            model_tag=model_tag,
            messages=tuple(session.transcript),
            max_tokens=cfg.max_response_tokens,
            temperature=temperature,
        )
        try:
            response = gateway.complete(request)
        except Exception as e:
            logger.warning("agent model failed mid-episode (%s); recording error trajectory", e)
            session.status = DONE_ERROR
            break
        reply = env.step(session, response.content)
        if reply.kind == REPLY_TERMINAL:
            break
    return session.to_trajectory()
