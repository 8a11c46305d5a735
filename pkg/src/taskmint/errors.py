"""Exception hierarchy for the whole engine.

Every error raised by taskmint derives from :class:`TaskmintError` so
callers can catch one base class at pipeline boundaries. Validation errors
carry the JSON-ish path of the first violated rule.
"""

from __future__ import annotations


class TaskmintError(Exception):
    """Base class for all engine errors."""


# ---------------------------------------------------------------------------
# schema


class SchemaError(TaskmintError):
    """Invalid domain object or serialized record."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.reason = message


class MissingField(SchemaError):
    pass


class BadIdentifier(SchemaError):
    pass


class DuplicateParameter(SchemaError):
    pass


class UnknownSemanticType(SchemaError):
    pass


class DuplicateToolName(SchemaError):
    pass


class UnknownTool(TaskmintError):
    """Tool name not present in the active toolset."""


class ParseError(TaskmintError):
    """A serialized record could not be parsed; names the offending line."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


# ---------------------------------------------------------------------------
# gateway


class GatewayError(TaskmintError):
    pass


class TransportError(GatewayError):
    """Remote call failed after all retries."""


class ScriptExhausted(GatewayError):
    """Scripted stub has no rule matching the request."""


class CassetteMiss(GatewayError):
    """Replay cassette has no recorded response for the request."""


# ---------------------------------------------------------------------------
# synthesis


class StageError(TaskmintError):
    """A synthesis stage failed after its bounded re-prompt budget."""

    stage = "unknown"

    def __init__(self, message: str, tokens: int = 0):
        super().__init__(message)
        self.tokens = tokens


class UnparseableWorkflow(StageError):
    stage = "workflow"


class InvalidToolSpec(StageError):
    stage = "toolset"


class DegenerateRewrite(StageError):
    stage = "fuzzify"


class UnparseableRewrite(StageError):
    stage = "reasoning_rewrite"


class SolverFailure(TaskmintError):
    """A consistency-check solve produced no usable answer."""


# ---------------------------------------------------------------------------
# mock environment


class MalformedToolCall(TaskmintError):
    """Agent emitted tool-call markup that could not be interpreted."""


class SimulatorParseFailure(TaskmintError):
    """Simulator reply violated its output protocol after retries."""


class SessionTerminated(TaskmintError):
    """Step attempted on a session that already reached a terminal state."""


# ---------------------------------------------------------------------------
# rubric / reward


class UnparseableRubric(TaskmintError):
    """Rubric extraction produced no usable subgoal list after retries."""


# ---------------------------------------------------------------------------
# service / registry


class UnknownTask(TaskmintError):
    pass


class UnknownSession(TaskmintError):
    pass


class UnknownRubric(TaskmintError):
    pass


class ConflictingContent(TaskmintError):
    """Registration would overwrite an existing id with different content."""


class ConfigError(TaskmintError):
    """Bad or missing configuration."""
