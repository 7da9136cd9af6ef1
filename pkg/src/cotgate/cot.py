"""Branch sampling and confidence scoring for uncertain lines.

When the engine decides a line is worth deliberating over, it samples
several completions whose leading comment lines spell out a reasoning
path, scores each candidate's first code line by the mean top-1/top-2
probability gap across its tokens, and keeps the code line of the most
confident candidate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Sequence

from .errors import (
    AllDegenerateError,
    DegenerateCandidateError,
    InvalidConfigurationError,
)
from .providers.base import Completion, FinishReason, Provider, TokenEvent
from .segmentation import parse_candidate


@dataclass(frozen=True)
class FewShotExample:
    """One worked problem shown before the real context.

    `reasoning` lines are rendered as comments (prefix added at render
    time); `code` is the finished body, verbatim.
    """

    requirement: str
    reasoning: tuple[str, ...]
    code: str


def load_examples(source: str | Path) -> tuple[FewShotExample, ...]:
    with open(source, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return _examples_from_doc(doc, str(source))


def _examples_from_doc(doc: dict, origin: str) -> tuple[FewShotExample, ...]:
    if doc.get("format_version") != 1:
        raise InvalidConfigurationError(
            f"unsupported few-shot format_version in {origin}"
        )
    out = []
    for raw in doc["examples"]:
        out.append(
            FewShotExample(
                requirement=raw["requirement"],
                reasoning=tuple(raw["reasoning"]),
                code=raw["code"],
            )
        )
    return tuple(out)


@lru_cache(maxsize=1)
def default_examples() -> tuple[FewShotExample, ...]:
    """The packaged two-example prompt used when no file is supplied."""
    text = (
        resources.files("cotgate")
        .joinpath("data/fewshot_default.json")
        .read_text(encoding="utf-8")
    )
    return _examples_from_doc(json.loads(text), "packaged default")


def render_example(example: FewShotExample, comment_prefix: str = "#") -> str:
    parts = [example.requirement.rstrip("\n"), "\n"]
    for line in example.reasoning:
        parts.append(f"{comment_prefix} {line}\n")
    parts.append(example.code.rstrip("\n"))
    parts.append("\n\n")
    return "".join(parts)


def build_cot_prompt(
    context: str,
    examples: Sequence[FewShotExample],
    comment_prefix: str = "#",
) -> str:
    """Prepend rendered examples to the live context; no examples, no change."""
    if not examples:
        return context
    shots = "".join(render_example(e, comment_prefix) for e in examples)
    return shots + context


@dataclass(frozen=True)
class CotConfig:
    k_samples: int = 5
    temperature: float = 0.4
    max_tokens: int = 192
    comment_prefix: str = "#"
    examples: tuple[FewShotExample, ...] = field(default_factory=default_examples)

    def __post_init__(self):
        if self.k_samples < 1:
            raise InvalidConfigurationError("k_samples must be >= 1")
        if self.temperature < 0.0:
            raise InvalidConfigurationError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise InvalidConfigurationError("max_tokens must be >= 1")
        if not self.comment_prefix:
            raise InvalidConfigurationError("comment_prefix must be non-empty")


def token_gap(event: TokenEvent) -> float:
    """Top-1 minus top-2 probability at this position, from the event's
    alternatives; a single reported alternative means the runner-up mass
    is treated as zero."""
    alts = event.alternatives
    p1 = math.exp(alts[0].logprob)
    p2 = math.exp(alts[1].logprob) if len(alts) > 1 else 0.0
    return p1 - p2


def mean_gap_over_span(completion: Completion, start: int, end: int) -> float | None:
    """Mean token gap over events overlapping [start, end) in the text.

    Offsets are character positions in `completion.full_text`. Returns
    None when no event overlaps the span.
    """
    gaps = []
    offset = 0
    for event in completion.events:
        event_end = offset + len(event.token_text)
        if event_end > start and offset < end:
            gaps.append(token_gap(event))
        offset = event_end
        if offset >= end:
            break
    if not gaps:
        return None
    return math.fsum(gaps) / len(gaps)


@dataclass(frozen=True)
class CotCandidate:
    """One sampled branch, parsed and scored."""

    index: int
    seed: int
    text: str
    reasoning: tuple[str, ...]
    code_line: str
    confidence: float | None
    finish_reason: FinishReason

    @property
    def degenerate(self) -> bool:
        return self.confidence is None


@dataclass(frozen=True)
class CotStepResult:
    candidates: tuple[CotCandidate, ...]
    selected_index: int

    @property
    def selected(self) -> CotCandidate:
        return self.candidates[self.selected_index]


def run_cot_step(
    provider: Provider,
    context: str,
    config: CotConfig,
    stop: Sequence[str],
    base_seed: int,
) -> CotStepResult:
    """Sample k branches at `context` and pick the most confident code line.

    Seeds run base_seed .. base_seed + k - 1 so a step is reproducible in
    isolation. Candidates without a parseable code line stay in the result
    (confidence None) for inspection but never win selection; if every
    branch is degenerate the caller must fall back, signalled by
    AllDegenerateError.
    """
    prompt = build_cot_prompt(context, config.examples, config.comment_prefix)
    candidates = []
    for i in range(config.k_samples):
        seed = base_seed + i
        completion = provider.sample_completion(
            prompt,
            temperature=config.temperature,
            stop=stop,
            max_tokens=config.max_tokens,
            seed=seed,
        )
        text = completion.full_text
        try:
            parsed = parse_candidate(text, config.comment_prefix)
        except DegenerateCandidateError:
            candidates.append(
                CotCandidate(i, seed, text, (), "", None, completion.finish_reason)
            )
            continue
        confidence = mean_gap_over_span(
            completion, parsed.code_start, parsed.code_end
        )
        candidates.append(
            CotCandidate(
                i,
                seed,
                text,
                parsed.reasoning,
                parsed.code_line,
                confidence,
                completion.finish_reason,
            )
        )
    scorable = [c for c in candidates if c.confidence is not None]
    if not scorable:
        raise AllDegenerateError(
            f"all {config.k_samples} sampled branches lack a code line",
            candidates=candidates,
        )
    best = max(scorable, key=lambda c: c.confidence)
    return CotStepResult(tuple(candidates), best.index)
