"""Generation strategies: direct sampling, reasoned sampling, two-stage idea
search, and observation-tree plan search, plus backtranslation.

Every strategy runs against a :class:`~ideatree.gateway.Gateway`, so the whole
module is exercised end to end with a scripted provider. Each pipeline stage
is a fresh conversation carrying only the documented context (problem plus
prior artifacts), never full chat history.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

from .corpus import Problem
from .errors import FormatError, SketchEmpty
from .gateway import ChatRequest, ChatResponse, Gateway, SamplingParams
from .prompts import PromptLibrary, numbered

logger = logging.getLogger(__name__)

SEARCH_METHODS = ("repeated_sampling", "cot", "idea_search", "plansearch")

SKETCH_ORIGINS = (
    "idea_search",
    "plansearch_direct",
    "plansearch_criticized",
    "backtranslated",
)


@dataclass(frozen=True)
class Observation:
    """One natural-language hint about the problem; the search primitive."""

    text: str
    depth: int = 1

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("observation text must be nonempty")
        if self.depth not in (1, 2):
            raise ValueError("observation depth must be 1 or 2")


@dataclass(frozen=True)
class ObservationCombo:
    """A subset of one observation pool; the empty subset is a valid node.

    `parent` links a second-order combo back to the first-order combo whose
    derived pool it was drawn from.
    """

    members: tuple[Observation, ...] = ()
    parent: "ObservationCombo | None" = None

    def path(self) -> tuple["ObservationCombo", ...]:
        """Combos from the root-most ancestor down to this combo."""
        chain: list[ObservationCombo] = []
        node: ObservationCombo | None = self
        while node is not None:
            chain.append(node)
            node = node.parent
        return tuple(reversed(chain))

    def path_observations(self) -> tuple[Observation, ...]:
        """All observations along the path, ancestors first."""
        out: list[Observation] = []
        for combo in self.path():
            out.extend(combo.members)
        return tuple(out)


@dataclass
class ObservationTree:
    """The recorded search structure: per-depth (parent combo, derived pool).

    ``layers[0]`` holds the single root expansion ``(None, first-order pool)``;
    ``layers[1]``, present when the tree goes two deep, holds one entry per
    first-order combo.
    """

    problem_id: str
    depth_limit: int
    layers: list[list[tuple[ObservationCombo | None, list[Observation]]]]
    combos_per_depth: list[list[ObservationCombo]]
    leaves: list[ObservationCombo]

    @property
    def first_order(self) -> list[Observation]:
        return self.layers[0][0][1]

    def all_observations(self) -> set[Observation]:
        return {obs for layer in self.layers for _combo, pool in layer for obs in pool}


@dataclass(frozen=True)
class Sketch:
    """A natural-language solution description with its provenance."""

    text: str
    origin: str
    source_combo: ObservationCombo | None = None
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("sketch text must be nonempty")
        if self.origin not in SKETCH_ORIGINS:
            raise ValueError(f"unknown sketch origin {self.origin!r}")


@dataclass
class SolutionCandidate:
    """One generated program plus the provenance chain that produced it."""

    problem_id: str
    method: str
    sample_index: int
    code: str | None = None
    format_ok: bool = False
    sketch: Sketch | None = None
    combo_path: tuple[ObservationCombo, ...] | None = None
    tokens_out_total: int = 0

    def __post_init__(self) -> None:
        if self.format_ok != (self.code is not None):
            raise ValueError("format_ok must hold exactly when code is present")

    @property
    def key(self) -> str:
        return f"{self.problem_id}/{self.method}/{self.sample_index}"


# -- response parsing --------------------------------------------------------

_FENCE_RE = re.compile(r"^\s*```")
_LANGUAGE_TAGS = {"python", "python3", "py", "text", "txt", "pseudocode"}


def extract_code(response_text: str) -> str:
    """Return the contents of the last fenced code block.

    Fence lines are stripped; a bare language-tag first line is stripped too,
    but only when the opening fence carried no tag of its own. A final block
    left unterminated at end-of-text is accepted. Raises :class:`FormatError`
    when no block exists or the chosen block is empty.
    """
    blocks: list[tuple[str, list[str]]] = []
    fence: str | None = None
    current: list[str] = []
    for line in response_text.split("\n"):
        if _FENCE_RE.match(line):
            if fence is None:
                fence, current = line, []
            else:
                blocks.append((fence, current))
                fence = None
        elif fence is not None:
            current.append(line)
    if fence is not None:
        blocks.append((fence, current))
    if not blocks:
        raise FormatError("no fenced code block in response")

    fence, lines = blocks[-1]
    bare_fence = not fence.strip().lstrip("`").strip()
    if bare_fence and lines and lines[0].strip().lower() in _LANGUAGE_TAGS:
        lines = lines[1:]
    while lines and not lines[0].strip():
        lines = lines[1:]
    while lines and not lines[-1].strip():
        lines = lines[:-1]
    if not lines:
        raise FormatError("fenced code block is empty")
    return "\n".join(lines)


_NUMBERED_RE = re.compile(r"^\s*\d+[.):]\s+(.*\S)\s*$")
_BULLET_RE = re.compile(r"^\s*[-*•]\s+(.*\S)\s*$")


def _parse_marked(text: str, marker: re.Pattern[str]) -> list[str]:
    items: list[str] = []
    for line in text.split("\n"):
        match = marker.match(line)
        if match:
            items.append(match.group(1))
        elif items and line.strip():
            # continuation of a wrapped item
            items[-1] = f"{items[-1]} {line.strip()}"
    return items


def parse_observation_list(text: str) -> list[str]:
    """Parse an enumerated model response into observation strings.

    Accepts numbered lines, then bulleted lines, then blank-line-separated
    paragraphs (two or more), in that priority order. A single paragraph of
    prose parses to nothing: the caller logs it as an empty parse.
    """
    items = _parse_marked(text, _NUMBERED_RE)
    if items:
        return items
    items = _parse_marked(text, _BULLET_RE)
    if items:
        return items
    paragraphs = [p.strip() for p in re.split(r"\n\s*\n", text) if p.strip()]
    if len(paragraphs) >= 2:
        return [" ".join(p.split()) for p in paragraphs]
    return []


def enumerate_subsets(
    observations: Sequence[Observation],
    max_size: int,
    *,
    parent: ObservationCombo | None = None,
) -> list[ObservationCombo]:
    """All subsets of size <= max_size, empty set included.

    Order is deterministic: by size, then lexicographic by member index, so
    for max_size=2 the count is 1 + n + C(n, 2).
    """
    if max_size < 0:
        raise ValueError("max_size must be >= 0")
    combos: list[ObservationCombo] = []
    for size in range(min(max_size, len(observations)) + 1):
        for picked in combinations(range(len(observations)), size):
            members = tuple(observations[i] for i in picked)
            combos.append(ObservationCombo(members=members, parent=parent))
    return combos


@dataclass(frozen=True)
class PlanSearchConfig:
    max_subset_size: int = 2
    depth: int = 2
    via_pseudocode: bool = True

    def __post_init__(self) -> None:
        if self.max_subset_size < 1:
            raise ValueError("max_subset_size must be >= 1")
        if self.depth not in (1, 2):
            raise ValueError("depth must be 1 or 2")


@dataclass
class PlanSearchResult:
    candidates: list[SolutionCandidate]
    tree: ObservationTree
    sketch_shortfall: int = 0
    critique_shortfall: int = 0


@dataclass
class _Expansion:
    """Tree plus per-leaf token cost of the observation calls on its path."""

    tree: ObservationTree
    leaf_tokens: list[int]


@dataclass
class _SketchJob:
    """One sketch headed for code generation, with its accumulated cost."""

    sketch: Sketch
    leaf: ObservationCombo
    tokens_so_far: int
    variant: int  # 0 = direct, 1 = criticized; salts the code-stage draws


class Searcher:
    """Binds the generation strategies to a gateway, model, and prompt set."""

    def __init__(
        self,
        gateway: Gateway,
        model: str,
        params: SamplingParams | None = None,
        prompts: PromptLibrary | None = None,
        *,
        batch_limit: int = 4,
    ) -> None:
        self.gateway = gateway
        self.model = model
        self.params = params or SamplingParams()
        self.prompts = prompts or PromptLibrary()
        self.batch_limit = batch_limit

    # -- request plumbing ------------------------------------------------------

    def _request(self, system: str, user: str, sample_index: int = 0) -> ChatRequest:
        return ChatRequest(
            model=self.model,
            system=system,
            turns=(("user", user),),
            params=self.params,
            sample_index=sample_index,
        )

    def _batch(self, requests: Sequence[ChatRequest]) -> list[ChatResponse | Exception]:
        return self.gateway.complete_batch(requests, self.batch_limit)

    def _code_candidate(
        self,
        problem: Problem,
        method: str,
        sample_index: int,
        final: ChatResponse | Exception | None,
        *,
        earlier_tokens: int = 0,
        sketch: Sketch | None = None,
        combo_path: tuple[ObservationCombo, ...] | None = None,
    ) -> SolutionCandidate:
        """Build a candidate from the final code-stage response (or failure)."""
        tokens = earlier_tokens
        code: str | None = None
        if isinstance(final, ChatResponse):
            tokens += final.tokens_out
            try:
                code = extract_code(final.text)
            except FormatError as exc:
                logger.debug("candidate %s/%s/%d: %s", problem.id, method, sample_index, exc)
        elif isinstance(final, Exception):
            logger.warning(
                "candidate %s/%s/%d failed: %s", problem.id, method, sample_index, final
            )
        return SolutionCandidate(
            problem_id=problem.id,
            method=method,
            sample_index=sample_index,
            code=code,
            format_ok=code is not None,
            sketch=sketch,
            combo_path=combo_path,
            tokens_out_total=tokens,
        )

    # -- baselines -------------------------------------------------------------

    def repeated_sampling(self, problem: Problem, n: int) -> list[SolutionCandidate]:
        """Draw n direct code samples; one provider call each."""
        if n < 1:
            raise ValueError("n must be >= 1")
        system = self.prompts.render("repeated_sampling_system")
        user = self.prompts.render("problem_user", problem=problem.statement)
        responses = self._batch([self._request(system, user, i) for i in range(n)])
        return [
            self._code_candidate(problem, "repeated_sampling", i, responses[i])
            for i in range(n)
        ]

    def chain_of_thought(self, problem: Problem, n: int) -> list[SolutionCandidate]:
        """Like repeated sampling, but the prompt asks for reasoning then code."""
        if n < 1:
            raise ValueError("n must be >= 1")
        system = self.prompts.render("cot_system")
        user = self.prompts.render("problem_user", problem=problem.statement)
        responses = self._batch([self._request(system, user, i) for i in range(n)])
        return [self._code_candidate(problem, "cot", i, responses[i]) for i in range(n)]

    # -- two-stage idea search ---------------------------------------------------

    def generate_sketch(self, problem: Problem, sample_index: int = 0) -> Sketch:
        """Stage one of idea search: ask for a high-level solution description."""
        request = self._request(
            self.prompts.render("idea_system"),
            self.prompts.render("idea_user", problem=problem.statement),
            sample_index,
        )
        response = self.gateway.complete(request)
        if not response.text.strip():
            raise SketchEmpty(f"empty sketch for {problem.id} sample {sample_index}")
        return Sketch(text=response.text.strip(), origin="idea_search")

    def implement_from_sketch(
        self,
        problem: Problem,
        sketch: Sketch,
        sample_index: int = 0,
        *,
        method: str = "idea_search",
        earlier_tokens: int = 0,
    ) -> SolutionCandidate:
        """Single implementation call in a fresh conversation."""
        request = self._request(
            self.prompts.render("implement_system"),
            self.prompts.render(
                "implement_user", problem=problem.statement, sketch=sketch.text
            ),
            sample_index,
        )
        try:
            response: ChatResponse | Exception = self.gateway.complete(request)
        except Exception as exc:  # noqa: BLE001 - degrade to a failed candidate
            response = exc
        return self._code_candidate(
            problem,
            method,
            sample_index,
            response,
            earlier_tokens=earlier_tokens,
            sketch=sketch,
        )

    def idea_search(self, problem: Problem, n: int) -> list[SolutionCandidate]:
        """n samples of sketch-then-implement; exactly 2n provider calls."""
        if n < 1:
            raise ValueError("n must be >= 1")
        idea_system = self.prompts.render("idea_system")
        idea_user = self.prompts.render("idea_user", problem=problem.statement)
        sketch_responses = self._batch(
            [self._request(idea_system, idea_user, i) for i in range(n)]
        )

        implement_system = self.prompts.render("implement_system")
        implement_requests: list[ChatRequest | None] = []
        sketches: list[Sketch | None] = []
        for i, item in enumerate(sketch_responses):
            if isinstance(item, ChatResponse) and item.text.strip():
                sketch = Sketch(text=item.text.strip(), origin="idea_search")
                sketches.append(sketch)
                implement_requests.append(
                    self._request(
                        implement_system,
                        self.prompts.render(
                            "implement_user",
                            problem=problem.statement,
                            sketch=sketch.text,
                        ),
                        i,
                    )
                )
            else:
                logger.warning("idea sketch %d for %s failed", i, problem.id)
                sketches.append(None)
                implement_requests.append(None)

        live_iter = iter(self._batch([r for r in implement_requests if r is not None]))

        candidates = []
        for i in range(n):
            sketch = sketches[i]
            if sketch is None:
                candidates.append(self._code_candidate(problem, "idea_search", i, None))
                continue
            item = next(live_iter)
            earlier = (
                sketch_responses[i].tokens_out
                if isinstance(sketch_responses[i], ChatResponse)
                else 0
            )
            candidates.append(
                self._code_candidate(
                    problem,
                    "idea_search",
                    i,
                    item,
                    earlier_tokens=earlier,
                    sketch=sketch,
                )
            )
        return candidates

    # -- observation tree ---------------------------------------------------------

    def generate_observations(
        self, problem: Problem, prior: ObservationCombo | None = None
    ) -> list[Observation]:
        """One provider call for first-order (no prior) or derived observations."""
        if prior is None:
            response = self.gateway.complete(self._first_order_request(problem))
            depth = 1
        else:
            response = self.gateway.complete(self._derived_request(problem, prior))
            depth = 2
        return self._observations_from_response(problem, response, depth)

    def _first_order_request(self, problem: Problem) -> ChatRequest:
        return self._request(
            self.prompts.render("observations_system"),
            self.prompts.render("observations_user", problem=problem.statement),
        )

    def _derived_request(self, problem: Problem, combo: ObservationCombo) -> ChatRequest:
        return self._request(
            self.prompts.render("observations_derived_system"),
            self.prompts.render(
                "observations_derived_user",
                problem=problem.statement,
                observations=numbered([m.text for m in combo.members]),
            ),
        )

    def _observations_from_response(
        self, problem: Problem, response: ChatResponse, depth: int
    ) -> list[Observation]:
        items = parse_observation_list(response.text)
        if not items:
            logger.warning(
                "empty observation parse for %s (depth %d); treating as zero",
                problem.id,
                depth,
            )
        return [Observation(text=item, depth=depth) for item in items]

    def observations_to_sketch(self, problem: Problem, combo: ObservationCombo) -> Sketch:
        """Turn one (possibly empty) combo into a direct sketch."""
        response = self.gateway.complete(self._sketch_request(problem, combo))
        if not response.text.strip():
            raise SketchEmpty(f"empty sketch response for {problem.id}")
        return Sketch(
            text=response.text.strip(),
            origin="plansearch_direct",
            source_combo=combo,
        )

    def _sketch_request(self, problem: Problem, combo: ObservationCombo) -> ChatRequest:
        observations = combo.path_observations()
        if observations:
            user = self.prompts.render(
                "combine_user",
                problem=problem.statement,
                observations=numbered([o.text for o in observations]),
            )
        else:
            user = self.prompts.render("combine_empty_user", problem=problem.statement)
        return self._request(self.prompts.render("sketch_system"), user)

    def criticize_sketch(self, problem: Problem, sketch: Sketch) -> Sketch:
        """Produce the paired sketch by assuming the first one is wrong."""
        response = self.gateway.complete(self._criticize_request(problem, sketch))
        text = response.text.strip()
        if not text:
            raise SketchEmpty(f"empty criticism response for {problem.id}")
        flags = ("duplicate_of_source",) if text == sketch.text else ()
        return Sketch(
            text=text,
            origin="plansearch_criticized",
            source_combo=sketch.source_combo,
            flags=flags,
        )

    def _criticize_request(self, problem: Problem, sketch: Sketch) -> ChatRequest:
        return self._request(
            self.prompts.render("criticize_system"),
            self.prompts.render(
                "criticize_user", problem=problem.statement, sketch=sketch.text
            ),
        )

    def sketch_to_code(
        self,
        problem: Problem,
        sketch: Sketch,
        via_pseudocode: bool = True,
        *,
        sample_index: int = 0,
        method: str = "plansearch",
        earlier_tokens: int = 0,
    ) -> SolutionCandidate:
        """Translate a sketch to code, optionally through a pseudocode stage."""
        tokens = earlier_tokens
        if via_pseudocode:
            pseudo_response = self.gateway.complete(
                self._pseudocode_request(problem, sketch, sample_index)
            )
            tokens += pseudo_response.tokens_out
            final_request = self._code_request(problem, pseudo_response.text, sample_index)
        else:
            final_request = self._request(
                self.prompts.render("implement_system"),
                self.prompts.render(
                    "implement_user", problem=problem.statement, sketch=sketch.text
                ),
                sample_index,
            )
        try:
            final: ChatResponse | Exception = self.gateway.complete(final_request)
        except Exception as exc:  # noqa: BLE001
            final = exc
        return self._code_candidate(
            problem,
            method,
            sample_index,
            final,
            earlier_tokens=tokens,
            sketch=sketch,
            combo_path=sketch.source_combo.path() if sketch.source_combo else None,
        )

    def _pseudocode_request(
        self, problem: Problem, sketch: Sketch, sample_index: int
    ) -> ChatRequest:
        return self._request(
            self.prompts.render("pseudocode_system"),
            self.prompts.render(
                "pseudocode_user", problem=problem.statement, sketch=sketch.text
            ),
            sample_index,
        )

    def _code_request(
        self, problem: Problem, pseudocode: str, sample_index: int
    ) -> ChatRequest:
        return self._request(
            self.prompts.render("code_from_pseudocode_system"),
            self.prompts.render(
                "code_from_pseudocode_user",
                problem=problem.statement,
                pseudocode=pseudocode,
            ),
            sample_index,
        )

    # -- plan search --------------------------------------------------------------

    def expand_tree(self, problem: Problem, cfg: PlanSearchConfig) -> ObservationTree:
        """Grow the observation tree down to cfg.depth and collect leaf combos."""
        return self._expand(problem, cfg).tree

    def _expand(self, problem: Problem, cfg: PlanSearchConfig) -> _Expansion:
        root_response = self.gateway.complete(self._first_order_request(problem))
        first = self._observations_from_response(problem, root_response, depth=1)
        root_tokens = root_response.tokens_out
        first_combos = enumerate_subsets(first, cfg.max_subset_size)
        layers: list[list[tuple[ObservationCombo | None, list[Observation]]]] = [
            [(None, first)]
        ]
        combos_per_depth = [first_combos]

        if cfg.depth == 1:
            tree = ObservationTree(
                problem_id=problem.id,
                depth_limit=cfg.depth,
                layers=layers,
                combos_per_depth=combos_per_depth,
                leaves=list(first_combos),
            )
            return _Expansion(tree=tree, leaf_tokens=[root_tokens] * len(first_combos))

        derived_responses = self._batch(
            [self._derived_request(problem, combo) for combo in first_combos]
        )
        second_layer: list[tuple[ObservationCombo | None, list[Observation]]] = []
        second_combos: list[ObservationCombo] = []
        leaves: list[ObservationCombo] = []
        leaf_tokens: list[int] = []
        for combo, item in zip(first_combos, derived_responses):
            if isinstance(item, Exception):
                logger.warning("derived observations failed for %s: %s", problem.id, item)
                pool: list[Observation] = []
                stage_tokens = 0
            else:
                pool = self._observations_from_response(problem, item, depth=2)
                stage_tokens = item.tokens_out
            second_layer.append((combo, pool))
            subsets = enumerate_subsets(pool, cfg.max_subset_size, parent=combo)
            second_combos.extend(subsets)
            leaves.extend(subsets)
            leaf_tokens.extend([root_tokens + stage_tokens] * len(subsets))
        layers.append(second_layer)
        combos_per_depth.append(second_combos)
        tree = ObservationTree(
            problem_id=problem.id,
            depth_limit=cfg.depth,
            layers=layers,
            combos_per_depth=combos_per_depth,
            leaves=leaves,
        )
        return _Expansion(tree=tree, leaf_tokens=leaf_tokens)

    def plan_search(
        self, problem: Problem, cfg: PlanSearchConfig | None = None
    ) -> list[SolutionCandidate]:
        return self.plan_search_run(problem, cfg).candidates

    def plan_search_run(
        self, problem: Problem, cfg: PlanSearchConfig | None = None
    ) -> PlanSearchResult:
        """Full pipeline: observations, combos, sketches, criticism, code.

        Emits two candidates per surviving leaf (direct + criticized sketch).
        Per-leaf failures degrade to logged shortfalls or format_ok=False
        candidates; a single leaf never aborts the run.
        """
        cfg = cfg or PlanSearchConfig()
        expansion = self._expand(problem, cfg)
        tree = expansion.tree

        sketch_responses = self._batch(
            [self._sketch_request(problem, leaf) for leaf in tree.leaves]
        )
        direct: list[tuple[ObservationCombo, Sketch, int]] = []
        sketch_shortfall = 0
        for leaf, path_tokens, item in zip(
            tree.leaves, expansion.leaf_tokens, sketch_responses
        ):
            if isinstance(item, Exception) or not item.text.strip():
                sketch_shortfall += 1
                logger.warning(
                    "sketch stage failed for a leaf of %s; leaf skipped", problem.id
                )
                continue
            sketch = Sketch(
                text=item.text.strip(), origin="plansearch_direct", source_combo=leaf
            )
            direct.append((leaf, sketch, path_tokens + item.tokens_out))

        critique_responses = self._batch(
            [self._criticize_request(problem, sketch) for _leaf, sketch, _t in direct]
        )
        jobs: list[_SketchJob] = []
        critique_shortfall = 0
        for (leaf, sketch, tokens), item in zip(direct, critique_responses):
            jobs.append(_SketchJob(sketch=sketch, leaf=leaf, tokens_so_far=tokens, variant=0))
            if isinstance(item, Exception) or not item.text.strip():
                critique_shortfall += 1
                logger.warning("criticism stage failed for a leaf of %s", problem.id)
                continue
            text = item.text.strip()
            flags = ("duplicate_of_source",) if text == sketch.text else ()
            jobs.append(
                _SketchJob(
                    sketch=Sketch(
                        text=text,
                        origin="plansearch_criticized",
                        source_combo=leaf,
                        flags=flags,
                    ),
                    leaf=leaf,
                    tokens_so_far=tokens + item.tokens_out,
                    variant=1,
                )
            )

        candidates = self._jobs_to_candidates(problem, jobs, cfg)
        return PlanSearchResult(
            candidates=candidates,
            tree=tree,
            sketch_shortfall=sketch_shortfall,
            critique_shortfall=critique_shortfall,
        )

    def _jobs_to_candidates(
        self, problem: Problem, jobs: list[_SketchJob], cfg: PlanSearchConfig
    ) -> list[SolutionCandidate]:
        if not jobs:
            return []
        if cfg.via_pseudocode:
            pseudo_responses = self._batch(
                [self._pseudocode_request(problem, job.sketch, job.variant) for job in jobs]
            )
            code_requests: list[ChatRequest | None] = []
            for job, item in zip(jobs, pseudo_responses):
                if isinstance(item, Exception):
                    code_requests.append(None)
                else:
                    job.tokens_so_far += item.tokens_out
                    code_requests.append(self._code_request(problem, item.text, job.variant))
            live_iter = iter(self._batch([r for r in code_requests if r is not None]))
            finals: list[ChatResponse | Exception | None] = [
                next(live_iter) if req is not None else None for req in code_requests
            ]
        else:
            finals = list(
                self._batch(
                    [
                        self._request(
                            self.prompts.render("implement_system"),
                            self.prompts.render(
                                "implement_user",
                                problem=problem.statement,
                                sketch=job.sketch.text,
                            ),
                            job.variant,
                        )
                        for job in jobs
                    ]
                )
            )

        return [
            self._code_candidate(
                problem,
                "plansearch",
                index,
                final,
                earlier_tokens=job.tokens_so_far,
                sketch=job.sketch,
                combo_path=job.leaf.path(),
            )
            for index, (job, final) in enumerate(zip(jobs, finals))
        ]

    # -- backtranslation ------------------------------------------------------------

    def backtranslate(self, problem: Problem, passing_code: str, word_budget: int) -> Sketch:
        """Compress a passing program back into a length-budgeted sketch."""
        if word_budget < 1:
            raise ValueError("word_budget must be >= 1")
        request = self._request(
            self.prompts.render("backtranslate_system"),
            self.prompts.render(
                "backtranslate_user",
                problem=problem.statement,
                code=passing_code,
                w=word_budget,
            ),
        )
        response = self.gateway.complete(request)
        if not response.text.strip():
            raise SketchEmpty(f"empty backtranslation for {problem.id}")
        return Sketch(text=response.text.strip(), origin="backtranslated")
