"""taskmint: synthesize tool-use agent tasks, simulate their environments,
and score trajectories with rubric-gated rewards."""

from .canonical import canonical_args, content_hash
from .config import EngineConfig, load_config
from .gateway import CassetteBackend, LLMGateway, RemoteBackend, StubBackend, build_gateway
from .toolspec import tool_to_function_schema, validate_tool_spec
from .types import (
    CanonicalCall,
    ChatRequest,
    ChatResponse,
    CoverageReport,
    EnvReply,
    ForbiddenConstraint,
    Message,
    PersonaRecord,
    ReasoningTask,
    RejectionRecord,
    RewardReport,
    Rubric,
    SynthTask,
    SynthesisOutcome,
    ToolSpec,
    Trajectory,
    WorkflowStep,
    canonicalize_call,
)

__version__ = "0.1.0"

# bumped whenever a wire body or endpoint changes shape
PROTOCOL_VERSION = "1"

__all__ = [
    "CanonicalCall",
    "CassetteBackend",
    "ChatRequest",
    "ChatResponse",
    "CoverageReport",
    "EngineConfig",
    "EnvReply",
    "ForbiddenConstraint",
    "LLMGateway",
    "Message",
    "PersonaRecord",
    "PROTOCOL_VERSION",
    "ReasoningTask",
    "RejectionRecord",
    "RemoteBackend",
    "RewardReport",
    "Rubric",
    "StubBackend",
    "SynthTask",
    "SynthesisOutcome",
    "ToolSpec",
    "Trajectory",
    "WorkflowStep",
    "build_gateway",
    "canonical_args",
    "canonicalize_call",
    "content_hash",
    "load_config",
    "tool_to_function_schema",
    "validate_tool_spec",
]
