"""Prompt templates for every pipeline stage.

Templates ship as ``*.txt`` package data with named ``{placeholder}`` fields
({problem}, {observations}, {sketch}, {pseudocode}, {code}, {w}, ...). Users
can override any template by pointing a run at a directory containing files
with the same names.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

TEMPLATE_NAMES = (
    "repeated_sampling_system",
    "problem_user",
    "cot_system",
    "idea_system",
    "idea_user",
    "implement_system",
    "implement_user",
    "observations_system",
    "observations_user",
    "observations_derived_system",
    "observations_derived_user",
    "sketch_system",
    "combine_user",
    "combine_empty_user",
    "criticize_system",
    "criticize_user",
    "pseudocode_system",
    "pseudocode_user",
    "code_from_pseudocode_system",
    "code_from_pseudocode_user",
    "backtranslate_system",
    "backtranslate_user",
    "judge_system",
    "judge_user",
    "judge_reprompt_user",
)


class PromptLibrary:
    """Loads default templates, optionally shadowed by an overrides directory."""

    def __init__(self, overrides_dir: str | Path | None = None) -> None:
        self._templates: dict[str, str] = {}
        for name in TEMPLATE_NAMES:
            self._templates[name] = (
                resources.files(__package__).joinpath(f"{name}.txt").read_text("utf-8")
            )
        if overrides_dir is not None:
            for path in sorted(Path(overrides_dir).glob("*.txt")):
                self._templates[path.stem] = path.read_text(encoding="utf-8")

    def render(self, name: str, **fields: object) -> str:
        try:
            template = self._templates[name]
        except KeyError:
            raise KeyError(f"unknown prompt template {name!r}") from None
        return template.format(**fields).strip("\n")


def numbered(items: list[str] | tuple[str, ...]) -> str:
    """Render observations the way the prompts expect: one numbered line each."""
    return "\n".join(f"{i + 1}. {text}" for i, text in enumerate(items))
