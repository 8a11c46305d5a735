"""Engine configuration: one flat key=value file shared by every command.

The file format is deliberately minimal — ``key = value`` lines, ``#``
comments — so a run is reproducible from a single human-editable artifact.
Selected keys can be overridden through ``TASKMINT_<KEY>`` environment
variables; the API credential is only ever read from the environment.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError

# keys that may be overridden from the environment (TASKMINT_<KEY>)
ENV_OVERRIDABLE = {
    "base_url",
    "bind_host",
    "bind_port",
    "synthesizer_model",
    "simulator_model",
    "judge_model",
    "teacher_model",
    "policy_model",
    "max_turns",
    "coverage_threshold",
    "judge_temperature",
}


@dataclass
class EngineConfig:
    # gateway
    backend: str = "stub"  # stub | remote | cassette
    base_url: str = "http://localhost:8000/v1"
    api_key_env: str = "TASKMINT_API_KEY"
    request_timeout_s: float = 120.0
    retries: int = 3
    retry_backoff_s: float = 0.5
    concurrency: int = 8
    stub_script: str = ""
    cassette_path: str = ""
    cassette_mode: str = "replay"  # replay | record

    # model tags: a strong synthesizer/teacher and a small simulator/judge
    synthesizer_model: str = "qwen3-235b-a22b-instruct-2507"
    simulator_model: str = "qwen3-30b-a3b-instruct-2507"
    judge_model: str = "qwen3-30b-a3b-instruct-2507"
    teacher_model: str = "qwen3-235b-a22b-instruct-2507"
    policy_model: str = "qwen3-8b"

    # synthesis
    synthesis_temperature: float = 0.7
    judge_temperature: float = 0.0
    stage_attempts: int = 3
    workflow_min_steps: int = 2
    workflow_max_steps: int = 12
    toolset_target: int = 4
    consistency_n: int = 3

    # rollout / environment
    max_turns: int = 16
    max_response_tokens: int = 13000
    persist_maps: bool = False

    # rubric
    teacher_demos: int = 4
    coverage_threshold: float = 0.5

    # service
    bind_host: str = "127.0.0.1"
    bind_port: int = 8080

    # cli
    jobs: int = 4

    def api_key(self) -> str | None:
        return os.environ.get(self.api_key_env)


def _coerce(name: str, kind: type, raw: str):
    if kind is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    try:
        return kind(raw.strip())
    except ValueError as e:
        raise ConfigError(f"{name}: {e}")


def parse_config_text(text: str, source: str = "<config>") -> EngineConfig:
    known = {f.name for f in fields(EngineConfig)}
    typed = {f.name: type(getattr(EngineConfig(), f.name)) for f in fields(EngineConfig)}
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in known:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, typed[key], raw)
    return EngineConfig(**values)  # type: ignore[arg-type]


def apply_env_overrides(cfg: EngineConfig, environ: dict[str, str] | None = None) -> EngineConfig:
    env = os.environ if environ is None else environ
    typed = {f.name: type(getattr(EngineConfig(), f.name)) for f in fields(EngineConfig)}
    for key in sorted(ENV_OVERRIDABLE):
        var = f"TASKMINT_{key.upper()}"
        if var in env:
            setattr(cfg, key, _coerce(key, typed[key], env[var]))
    return cfg


def load_config(path: str | Path | None) -> EngineConfig:
    """Load config from ``path`` (defaults when None), then apply env overrides.

    Relative file paths inside the config (stub script, cassette) resolve
    against the config file's own directory, so a config travels with its
    fixtures.
    """
    if path is None:
        cfg = EngineConfig()
    else:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        cfg = parse_config_text(p.read_text(encoding="utf-8"), source=str(p))
        for key in ("stub_script", "cassette_path"):
            value = getattr(cfg, key)
            if value and not Path(value).is_absolute():
                setattr(cfg, key, str((p.parent / value).resolve()))
    return apply_env_overrides(cfg)
