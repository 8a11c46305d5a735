"""Config file parsing and env overrides."""

from __future__ import annotations

import pytest

from taskmint.config import EngineConfig, apply_env_overrides, load_config, parse_config_text
from taskmint.errors import ConfigError


def test_parse_key_value_lines():
    cfg = parse_config_text(
        """
        # comment
        backend = stub
        stub_script = /tmp/script.jsonl
        max_turns = 8
        judge_temperature = 0.0
        persist_maps = true
        """
    )
    assert cfg.backend == "stub"
    assert cfg.max_turns == 8
    assert cfg.persist_maps is True


def test_unknown_key_rejected_with_location():
    with pytest.raises(ConfigError) as err:
        parse_config_text("no_such_key = 1", source="demo.cfg")
    assert "demo.cfg" in str(err.value)


def test_bad_value_rejected():
    with pytest.raises(ConfigError):
        parse_config_text("max_turns = many")
    with pytest.raises(ConfigError):
        parse_config_text("persist_maps = maybe")


def test_env_overrides_selected_keys():
    cfg = apply_env_overrides(
        EngineConfig(),
        environ={"TASKMINT_MAX_TURNS": "4", "TASKMINT_COVERAGE_THRESHOLD": "0.75", "TASKMINT_BACKEND": "remote"},
    )
    assert cfg.max_turns == 4
    assert cfg.coverage_threshold == 0.75
    assert cfg.backend == "stub"  # backend is not env-overridable


def test_missing_config_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError) as err:
        load_config(tmp_path / "absent.cfg")
    assert "absent.cfg" in str(err.value)


def test_relative_stub_script_resolves_against_config_dir(tmp_path):
    (tmp_path / "engine.cfg").write_text("backend = stub\nstub_script = script.jsonl\n", encoding="utf-8")
    cfg = load_config(tmp_path / "engine.cfg")
    assert cfg.stub_script == str((tmp_path / "script.jsonl").resolve())


def test_defaults_match_training_setup():
    cfg = EngineConfig()
    assert cfg.max_turns == 16
    assert cfg.max_response_tokens == 13000
    assert cfg.teacher_demos == 4
    assert cfg.coverage_threshold == 0.5
    assert cfg.consistency_n == 3
    assert cfg.retries == 3
    assert cfg.request_timeout_s == 120.0
