"""Reusable scripted-provider rule sets keyed on pipeline-stage prompt text."""

from __future__ import annotations

from ideatree.gateway import ScriptRule, ScriptedProvider
from ideatree.prompts import numbered

CODE_BLOCK = "```python\nprint(42)\n```"

# Substrings unique to one pipeline stage's prompts.
STAGE = {
    "repeated_sampling": "will generate a correct Python program that matches the specification",
    "cot": "First think through the problem step by step",
    "idea": "Brainstorm a high-level, natural language solution",
    "implement": "natural language solution/tutorial",
    "observations": "non-obvious, and correct observations about the problem, like hints",
    "derived": "derived from the given observations",
    "sketch": "describe a natural language solution to the problem, like an editorial",
    "criticize": "Suppose the proposed solution above is wrong",
    "pseudocode": "Translate the solution into detailed pseudocode",
    "code_from_pseudocode": "faithfully implements the pseudocode",
    "backtranslate": "Convert this solution into a high-level, natural language description",
    "judge_reprompt": "Your answer was not understood",
    "judge": "Are the ideas behind these two codes the same?",
}


def observation_list(count: int, prefix: str = "obs") -> str:
    return numbered([f"{prefix} {i}" for i in range(count)])


def plansearch_provider(
    n1: int = 4,
    n2: int = 2,
    *,
    sketch_text: str = "use two pointers over the sorted input",
    critique_text: str = "the pointers miss duplicates; dedupe first, then scan",
    code: str = CODE_BLOCK,
    latency: float = 0.0,
) -> ScriptedProvider:
    """A fully well-formed script for every plan-search stage."""
    first = observation_list(n1) if n1 else "Nothing structured comes to mind here."
    derived = observation_list(n2, "derived") if n2 else "No derived thoughts."
    return ScriptedProvider(
        [
            ScriptRule(contains=STAGE["derived"], responses=(derived,)),
            ScriptRule(contains=STAGE["observations"], responses=(first,)),
            ScriptRule(contains=STAGE["criticize"], responses=(critique_text,)),
            ScriptRule(contains=STAGE["sketch"], responses=(sketch_text,)),
            ScriptRule(contains=STAGE["pseudocode"], responses=("PSEUDO: scan once",)),
            ScriptRule(contains=STAGE["code_from_pseudocode"], responses=(code,)),
            ScriptRule(contains=STAGE["implement"], responses=(code,)),
        ],
        latency=latency,
    )


def simple_provider(**overrides: str | tuple[str, ...]) -> ScriptedProvider:
    """Stage -> response map for the non-tree methods; sensible defaults."""
    responses: dict[str, tuple[str, ...]] = {
        "repeated_sampling": (CODE_BLOCK,),
        "cot": (f"Step 1: read input.\nStep 2: answer.\n{CODE_BLOCK}",),
        "idea": ("sort then scan",),
        "implement": (CODE_BLOCK,),
        "backtranslate": ("walk the array once keeping a running best",),
        "judge_reprompt": ("No.",),
        "judge": ("No.",),
    }
    for stage, value in overrides.items():
        if stage not in STAGE:
            raise KeyError(stage)
        responses[stage] = (value,) if isinstance(value, str) else tuple(value)
    return ScriptedProvider(
        [ScriptRule(contains=STAGE[s], responses=r) for s, r in responses.items()]
    )
