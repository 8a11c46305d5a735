"""Canonical forms for tool-call arguments and content-derived ids.

A canonical call is the equality key of the consistency map: two calls that
differ only in key order, string edge-whitespace, or number formatting must
collapse to the same key. Canonicalization is idempotent.

Numbers use the shortest decimal form that round-trips; a float with an
integral value becomes an int so ``1.0`` and ``1`` compare equal. Nested
objects are canonicalized recursively; arrays keep their element order.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

from .errors import UnknownTool


def canonical_value(value: Any) -> Any:
    """Return the canonical form of one argument value."""
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if value.is_integer():
            return int(value)
        return value
    if isinstance(value, str):
        return value.strip()
    if isinstance(value, (list, tuple)):
        return [canonical_value(v) for v in value]
    if isinstance(value, dict):
        return {str(k).strip(): canonical_value(v) for k, v in sorted(value.items(), key=lambda kv: str(kv[0]).strip())}
    raise TypeError(f"unsupported argument value of type {type(value).__name__}")


def canonical_args(args: dict[str, Any]) -> dict[str, Any]:
    """Canonicalize a whole argument map (sorted keys, normalized values)."""
    out = canonical_value(dict(args))
    assert isinstance(out, dict)
    return out


def canonical_json(obj: Any) -> str:
    """Deterministic JSON rendering used for map keys and content hashes."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def call_signature(tool: str, args: dict[str, Any]) -> str:
    """Stable string key for an already-canonical (tool, args) pair."""
    return canonical_json([tool, args])


def content_hash(obj: Any, length: int = 16) -> str:
    """Hex digest of the canonical JSON of ``obj``, truncated to ``length``.

    Used for reproducible task ids: the same content always hashes to the
    same id across pipeline reruns.
    """
    digest = hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()
    return digest[:length]


def check_known_tool(tool: str, toolset_names: set[str] | None) -> None:
    if toolset_names is not None and tool not in toolset_names:
        raise UnknownTool(f"tool {tool!r} is not in the active toolset")
