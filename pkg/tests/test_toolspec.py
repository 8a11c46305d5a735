"""validate_tool_spec: fixture acceptance and mutation rejection."""

from __future__ import annotations

import pytest

from taskmint.errors import BadIdentifier, DuplicateParameter, MissingField, UnknownSemanticType
from taskmint.toolspec import tool_to_function_schema, validate_tool_spec
from taskmint.types import ParameterSpec, ToolSpec
from tests.conftest import make_newsletter_toolset

TRANSCRIBER_DOC = {
    "name": "VoiceTranscriber",
    "description": "Converts short spoken audio clips into punctuated text; designed for seniors with a simple UI.",
    "parameters": {
        "type": "object",
        "properties": {
            "audio_file_path": {"type": "string", "description": "File path or URL to the audio clip (.mp3/.wav)."}
        },
        "required": ["audio_file_path"],
    },
}


def test_transcriber_doc_is_valid():
    tool = validate_tool_spec(TRANSCRIBER_DOC)
    assert tool.name == "VoiceTranscriber"
    assert len(tool.parameters) == 1
    assert tool.required_names == ("audio_file_path",)


def test_formatter_has_six_required_of_seven():
    formatter = next(t for t in make_newsletter_toolset() if t.name == "NewsletterFormatter")
    doc = tool_to_function_schema(formatter)
    tool = validate_tool_spec(doc)
    assert len(tool.parameters) == 7
    assert len(tool.required_names) == 6
    assert "audio_narration_url" not in tool.required_names


def test_empty_name_is_bad_identifier():
    with pytest.raises(BadIdentifier):
        validate_tool_spec({**TRANSCRIBER_DOC, "name": ""})


def test_wrapped_function_form_accepted():
    tool = validate_tool_spec({"type": "function", "function": TRANSCRIBER_DOC})
    assert tool.name == "VoiceTranscriber"


def test_missing_fields_name_their_path():
    with pytest.raises(MissingField) as err:
        validate_tool_spec({"description": "x", "parameters": {"type": "object", "properties": {}}})
    assert "$.name" in str(err.value)
    with pytest.raises(MissingField) as err:
        validate_tool_spec({"name": "T", "parameters": {"type": "object", "properties": {}}})
    assert "$.description" in str(err.value)
    with pytest.raises(MissingField) as err:
        validate_tool_spec({"name": "T", "description": "x"})
    assert "$.parameters" in str(err.value)


def test_unknown_semantic_type_rejected():
    doc = {
        "name": "T",
        "description": "x",
        "parameters": {"type": "object", "properties": {"a": {"type": "decimal"}}, "required": []},
    }
    with pytest.raises(UnknownSemanticType) as err:
        validate_tool_spec(doc)
    assert "properties.a" in str(err.value)


def test_duplicate_required_entry_rejected():
    doc = {
        "name": "T",
        "description": "x",
        "parameters": {"type": "object", "properties": {"a": {"type": "string"}}, "required": ["a", "a"]},
    }
    with pytest.raises(DuplicateParameter):
        validate_tool_spec(doc)


def test_required_param_must_be_declared():
    doc = {
        "name": "T",
        "description": "x",
        "parameters": {"type": "object", "properties": {"a": {"type": "string"}}, "required": ["b"]},
    }
    with pytest.raises(MissingField) as err:
        validate_tool_spec(doc)
    assert "required[0]" in str(err.value)


def test_bad_parameter_identifier_rejected():
    doc = {
        "name": "T",
        "description": "x",
        "parameters": {"type": "object", "properties": {"9a": {"type": "string"}}},
    }
    with pytest.raises(BadIdentifier):
        validate_tool_spec(doc)


def test_constructor_rejects_duplicate_parameters():
    with pytest.raises(DuplicateParameter):
        ToolSpec(
            name="T",
            description="x",
            parameters=(ParameterSpec("a", "string"), ParameterSpec("a", "integer")),
        )


def test_every_fixture_tool_round_trips():
    for tool in make_newsletter_toolset():
        doc = tool_to_function_schema(tool)
        assert validate_tool_spec(doc) == tool
