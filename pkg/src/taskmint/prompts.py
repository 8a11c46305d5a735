"""Prompt templates shipped with the engine.

Templates are plain-text files under ``taskmint/prompts/`` using
``string.Template`` placeholders (``${name}``), which keeps literal JSON
braces in the templates untouched.
"""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path
from string import Template

_PROMPT_DIR = Path(__file__).parent / "prompts"


@lru_cache(maxsize=None)
def _template(name: str) -> Template:
    return Template((_PROMPT_DIR / f"{name}.txt").read_text(encoding="utf-8"))


def render(name: str, **subs: str) -> str:
    return _template(name).substitute(**subs)
