"""Validation of tool specifications against the function-calling convention.

The wire layout is the one chat-completion APIs register tools in: an object
with ``name``, ``description``, and ``parameters`` as a JSON-Schema-style
object holding ``properties`` and ``required``. ``validate_tool_spec`` turns
such a document into a :class:`ToolSpec` or raises the first violated rule
with its path.
"""

from __future__ import annotations

from typing import Any

from .errors import BadIdentifier, DuplicateParameter, MissingField, SchemaError, UnknownSemanticType
from .types import IDENTIFIER_RE, SEMANTIC_TYPES, ParameterSpec, ToolSpec


def validate_tool_spec(raw: Any) -> ToolSpec:
    """Validate one structured tool document and return the ToolSpec.

    Accepts either the bare layout ``{name, description, parameters}`` or the
    wrapped ``{"type": "function", "function": {...}}`` form.
    """
    if isinstance(raw, dict) and raw.get("type") == "function" and isinstance(raw.get("function"), dict):
        raw = raw["function"]
    if not isinstance(raw, dict):
        raise SchemaError(f"tool spec must be an object, got {type(raw).__name__}", "$")

    name = raw.get("name")
    if name is None:
        raise MissingField("missing tool name", "$.name")
    if not isinstance(name, str) or not IDENTIFIER_RE.match(name):
        raise BadIdentifier(f"tool name {name!r} is not an identifier", "$.name")

    description = raw.get("description")
    if description is None:
        raise MissingField("missing tool description", "$.description")
    if not isinstance(description, str):
        raise SchemaError("description must be a string", "$.description")

    params_obj = raw.get("parameters")
    if params_obj is None:
        raise MissingField("missing parameters object", "$.parameters")
    if not isinstance(params_obj, dict):
        raise SchemaError("parameters must be an object", "$.parameters")
    if params_obj.get("type", "object") != "object":
        raise UnknownSemanticType(f"parameters.type must be 'object', got {params_obj.get('type')!r}", "$.parameters.type")

    properties = params_obj.get("properties", {})
    if not isinstance(properties, dict):
        raise SchemaError("properties must be an object", "$.parameters.properties")

    required = params_obj.get("required", [])
    if not isinstance(required, list) or any(not isinstance(r, str) for r in required):
        raise SchemaError("required must be a list of parameter names", "$.parameters.required")
    seen_required: set[str] = set()
    for i, r in enumerate(required):
        if r in seen_required:
            raise DuplicateParameter(f"parameter {r!r} listed twice in required", f"$.parameters.required[{i}]")
        seen_required.add(r)
        if r not in properties:
            raise MissingField(f"required parameter {r!r} is not declared in properties", f"$.parameters.required[{i}]")

    params: list[ParameterSpec] = []
    for pname, pspec in properties.items():
        path = f"$.parameters.properties.{pname}"
        if not isinstance(pname, str) or not IDENTIFIER_RE.match(pname):
            raise BadIdentifier(f"parameter name {pname!r} is not an identifier", path)
        if not isinstance(pspec, dict):
            raise SchemaError("parameter spec must be an object", path)
        ptype = pspec.get("type")
        if ptype is None:
            raise MissingField("missing parameter type", f"{path}.type")
        if ptype not in SEMANTIC_TYPES:
            raise UnknownSemanticType(f"{ptype!r} is not one of {sorted(SEMANTIC_TYPES)}", f"{path}.type")
        params.append(
            ParameterSpec(
                name=pname,
                semantic_type=ptype,
                description=str(pspec.get("description", "")),
                required=pname in seen_required,
            )
        )

    return ToolSpec(name=name, description=description, parameters=tuple(params))


def tool_to_function_schema(tool: ToolSpec) -> dict[str, Any]:
    """Render a ToolSpec in the function-calling wire layout."""
    properties: dict[str, Any] = {}
    for p in tool.parameters:
        entry: dict[str, Any] = {"type": p.semantic_type}
        if p.description:
            entry["description"] = p.description
        properties[p.name] = entry
    return {
        "name": tool.name,
        "description": tool.description,
        "parameters": {
            "type": "object",
            "properties": properties,
            "required": list(tool.required_names),
        },
    }
