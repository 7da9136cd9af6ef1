"""Line-by-line decoding controller.

Each code line starts with a cheap greedy pass over any indentation
tokens, then the next-token distribution at the first non-indentation
position is measured for uncertainty. Lines that clear the configured
threshold are handed to branch sampling (several reasoning-plus-code
candidates, best confidence wins); everything else is decoded greedily.
The per-line records keep the measured distribution so gating decisions
can be replayed offline from a trace alone.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum

from .cot import (
    CotCandidate,
    CotConfig,
    build_cot_prompt,
    mean_gap_over_span,
    run_cot_step,
)
from .errors import (
    AllDegenerateError,
    CapabilityMissingError,
    GenerationError,
    InvalidConfigurationError,
    InvalidDistributionError,
    ProviderUnavailableError,
    ScenarioMissError,
)
from .providers.base import FinishReason, Provider
from .segmentation import is_indentation_token
from .uncertainty import (
    Measure,
    TokenDistribution,
    TruncationMode,
    UncertaintyScore,
    entropy_uncertainty,
    gate,
    pd_uncertainty,
)

# Function-ending markers for code-completion prompts. "\n#" is deliberately
# absent: injected reasoning comments must not end generation.
DEFAULT_STOP = ("\nclass ", "\ndef ", "\nif __name__")

DEFAULT_TAU = {
    Measure.ENTROPY: 0.25,
    Measure.PROBABILITY_DIFFERENTIAL: 0.45,
}

_PROVIDER_FAILURES = (
    ProviderUnavailableError,
    ScenarioMissError,
    CapabilityMissingError,
    InvalidDistributionError,
)


class EngineMode(str, Enum):
    GREEDY = "greedy"
    GATED = "gated"
    ALWAYS_COT = "always"
    FULL_COT = "full"


class EngineFinish(str, Enum):
    STOP = "stop"
    END_OF_SEQUENCE = "end_of_sequence"
    MAX_LINES = "max_lines"
    MAX_TOKENS = "max_tokens"
    ERROR = "error"


_FINISH_FROM_SAMPLE = {
    FinishReason.STOP: EngineFinish.STOP,
    FinishReason.MAX_TOKENS: EngineFinish.MAX_TOKENS,
    FinishReason.END_OF_SEQUENCE: EngineFinish.END_OF_SEQUENCE,
}


@dataclass(frozen=True)
class EngineConfig:
    """Knobs for one decoding run.

    tau defaults per measure (0.25 for entropy, 0.45 for the probability
    differential) when left as None; tau=1.0 never triggers deliberation
    because gating is strict greater-than on values clamped to [0, 1].
    """

    mode: EngineMode = EngineMode.GATED
    measure: Measure = Measure.ENTROPY
    tau: float | None = None
    truncation_mode: TruncationMode = TruncationMode.RESIDUAL_UNIFORM
    cot: CotConfig = field(default_factory=CotConfig)
    stop: tuple[str, ...] = DEFAULT_STOP
    dedent_stop: bool = True
    max_lines: int = 64
    max_tokens_per_line: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.tau is None:
            object.__setattr__(self, "tau", DEFAULT_TAU[self.measure])
        if not 0.0 <= self.tau <= 1.0:
            raise InvalidConfigurationError("tau must lie in [0, 1]")
        if self.max_lines < 1:
            raise InvalidConfigurationError("max_lines must be >= 1")
        if self.max_tokens_per_line < 1:
            raise InvalidConfigurationError("max_tokens_per_line must be >= 1")
        if any(not s for s in self.stop):
            raise InvalidConfigurationError("stop strings must be non-empty")


@dataclass(frozen=True)
class LineRecord:
    """One generated line (or line fragment) and how it was decided.

    emitted_text is exactly the bytes this line appended to the context;
    concatenating records reproduces the completion. pre_indent includes
    whitespace carried over from a previous fused token, which is *not*
    part of emitted_text. emitted_token_ids track greedily emitted tokens
    only; deliberated lines append text whose token identity lives in the
    winning candidate.
    """

    index: int
    pre_indent: str
    mid_line: bool
    distribution: TokenDistribution | None
    uncertainty: UncertaintyScore | None
    gated: bool
    used_cot: bool
    fallback_used: bool
    candidates: tuple[CotCandidate, ...]
    selected_index: int | None
    emitted_text: str
    emitted_token_ids: tuple[int, ...]

    @property
    def reasoning_line_count(self) -> int:
        if not self.used_cot or self.selected_index is None:
            return 0
        return len(self.candidates[self.selected_index].reasoning)


@dataclass(frozen=True)
class GenerationResult:
    prompt: str
    records: tuple[LineRecord, ...]
    finish: EngineFinish
    mode: EngineMode

    @property
    def completion_text(self) -> str:
        return "".join(r.emitted_text for r in self.records)

    @property
    def full_text(self) -> str:
        return self.prompt + self.completion_text

    def stripped_completion(self) -> str:
        """Completion with injected reasoning comment lines removed."""
        parts = []
        for record in self.records:
            n = record.reasoning_line_count
            if n == 0:
                parts.append(record.emitted_text)
                continue
            lines = record.emitted_text.splitlines(keepends=True)
            parts.append("".join(lines[n:]))
        return "".join(parts)


class _LineOutcome:
    """Mutable scratch for one line; frozen into a LineRecord at the end."""

    __slots__ = (
        "pre_indent",
        "mid_line",
        "distribution",
        "uncertainty",
        "gated",
        "used_cot",
        "fallback_used",
        "candidates",
        "selected_index",
        "emitted",
        "token_ids",
        "code_text",
        "finish",
    )

    def __init__(self, carried_ws: str, mid_line: bool):
        # For mid_line records, pre_indent holds the carried non-whitespace
        # fragment instead of indentation; it never re-enters emitted text.
        self.pre_indent = carried_ws
        self.mid_line = mid_line
        self.distribution: TokenDistribution | None = None
        self.uncertainty: UncertaintyScore | None = None
        self.gated = False
        self.used_cot = False
        self.fallback_used = False
        self.candidates: tuple[CotCandidate, ...] = ()
        self.selected_index: int | None = None
        self.emitted: list[str] = []
        self.token_ids: list[int] = []
        self.code_text = ""
        self.finish: EngineFinish | None = None

    def emit(self, entry) -> None:
        self.emitted.append(entry.token_text)
        self.token_ids.append(entry.token_id)

    def record(self, index: int) -> LineRecord:
        return LineRecord(
            index=index,
            pre_indent=self.pre_indent,
            mid_line=self.mid_line,
            distribution=self.distribution,
            uncertainty=self.uncertainty,
            gated=self.gated,
            used_cot=self.used_cot,
            fallback_used=self.fallback_used,
            candidates=self.candidates,
            selected_index=self.selected_index,
            emitted_text="".join(self.emitted),
            emitted_token_ids=tuple(self.token_ids),
        )


def _tail_state(token_text: str) -> tuple[str, bool]:
    """(carried_ws, mid_line) implied by a newline-bearing token's tail."""
    tail = token_text[token_text.rfind("\n") + 1 :]
    if not tail:
        return "", False
    if is_indentation_token(tail):
        return tail, False
    return tail, True


def _prompt_tail_state(prompt: str) -> tuple[str, bool]:
    last_nl = prompt.rfind("\n")
    tail = prompt[last_nl + 1 :]
    if not tail:
        return "", False
    if is_indentation_token(tail):
        return tail, False
    return tail, True


def _measure(dist: TokenDistribution, config: EngineConfig) -> UncertaintyScore:
    if config.measure is Measure.ENTROPY:
        return entropy_uncertainty(dist, config.truncation_mode)
    return pd_uncertainty(dist)


def generate(provider: Provider, prompt: str, config: EngineConfig) -> GenerationResult:
    """Decode a completion for `prompt` under `config`.

    Provider failures mid-run raise GenerationError carrying the lines
    completed so far as `partial_result`.
    """
    if not prompt:
        raise InvalidConfigurationError("prompt must be non-empty")
    if config.mode is EngineMode.FULL_COT:
        return _generate_full(provider, prompt, config)

    records: list[LineRecord] = []
    try:
        return _generate_lines(provider, prompt, config, records)
    except _PROVIDER_FAILURES as exc:
        partial = GenerationResult(
            prompt, tuple(records), EngineFinish.ERROR, config.mode
        )
        raise GenerationError(str(exc), partial) from exc


def _generate_lines(
    provider: Provider,
    prompt: str,
    config: EngineConfig,
    records: list[LineRecord],
) -> GenerationResult:
    context = prompt
    carried_ws, carried_mid = _prompt_tail_state(prompt)
    finish: EngineFinish | None = None

    for line_index in range(config.max_lines):
        outcome = _emit_line(provider, context, config, line_index, carried_ws, carried_mid)
        records.append(outcome.record(line_index))
        context += "".join(outcome.emitted)
        if outcome.finish is not None:
            finish = outcome.finish
            break
        carried_ws, carried_mid = _tail_state("".join(outcome.emitted) or "\n")

        completion_len = len(context) - len(prompt)
        new_start = completion_len - len(records[-1].emitted_text)
        cut = _scan_stops(context[len(prompt) :], new_start, config.stop)
        if cut is not None:
            _truncate_records(records, cut)
            finish = EngineFinish.STOP
            break
        if config.dedent_stop and _is_dedent_stop(outcome, config):
            records[-1] = dataclasses.replace(
                records[-1], emitted_text="", emitted_token_ids=()
            )
            finish = EngineFinish.STOP
            break
    if finish is None:
        finish = EngineFinish.MAX_LINES
    result_records = tuple(records)
    return GenerationResult(prompt, result_records, finish, config.mode)


def _is_dedent_stop(outcome: _LineOutcome, config: EngineConfig) -> bool:
    """A completed column-zero statement means the function body is over."""
    text = outcome.code_text
    if not text or not text.endswith("\n"):
        return False
    if outcome.pre_indent:
        return False
    if text[0] in " \t":
        return False
    stripped = text.strip()
    if not stripped or stripped.startswith(config.cot.comment_prefix):
        return False
    return True


def _scan_stops(completion: str, new_start: int, stops: tuple[str, ...]) -> int | None:
    """Earliest stop occurrence that includes material past new_start."""
    best: int | None = None
    for stop in stops:
        start = max(0, new_start - len(stop) + 1)
        pos = completion.find(stop, start)
        if pos != -1 and (best is None or pos < best):
            best = pos
    return best


def _truncate_records(records: list[LineRecord], keep_chars: int) -> None:
    """Trim record texts from the end so their concatenation has keep_chars."""
    total = sum(len(r.emitted_text) for r in records)
    excess = total - keep_chars
    for i in range(len(records) - 1, -1, -1):
        if excess <= 0:
            break
        text = records[i].emitted_text
        cut = min(len(text), excess)
        if cut:
            records[i] = dataclasses.replace(
                records[i],
                emitted_text=text[: len(text) - cut],
                emitted_token_ids=(),
            )
        excess -= cut


def _emit_line(
    provider: Provider,
    context: str,
    config: EngineConfig,
    line_index: int,
    carried_ws: str,
    carried_mid: bool,
) -> _LineOutcome:
    outcome = _LineOutcome(carried_ws, carried_mid)

    if carried_mid:
        # A previous fused token already started this line; no measurement
        # point exists, so finish the line greedily.
        _greedy_to_line_end(provider, outcome, context, config, dist=None)
        outcome.code_text = "".join(outcome.emitted)
        return outcome

    # Indentation pre-pass: emit whitespace tokens greedily until the first
    # non-indentation position, which is where uncertainty is measured.
    eos_id = provider.eos_token_id
    dist = provider.next_distribution(context)
    while True:
        top = dist.entries[0]
        if eos_id is not None and top.token_id == eos_id:
            outcome.finish = EngineFinish.END_OF_SEQUENCE
            return outcome
        if not is_indentation_token(top.token_text):
            break
        outcome.emit(top)
        outcome.pre_indent += top.token_text
        if len(outcome.token_ids) >= config.max_tokens_per_line:
            outcome.finish = EngineFinish.MAX_TOKENS
            return outcome
        dist = provider.next_distribution(context + "".join(outcome.emitted))

    outcome.distribution = dist
    outcome.uncertainty = _measure(dist, config)
    outcome.gated = gate(outcome.uncertainty, config.tau)
    use_cot = config.mode is EngineMode.ALWAYS_COT or (
        config.mode is EngineMode.GATED and outcome.gated
    )

    if use_cot:
        base_seed = config.seed + line_index * config.cot.k_samples
        ctx = context + "".join(outcome.emitted)
        try:
            step = run_cot_step(provider, ctx, config.cot, config.stop, base_seed)
        except AllDegenerateError as exc:
            outcome.fallback_used = True
            outcome.candidates = exc.candidates
        else:
            outcome.used_cot = True
            outcome.candidates = step.candidates
            outcome.selected_index = step.selected_index
            selected = step.selected
            for line in selected.reasoning:
                outcome.emitted.append(line + "\n")
            outcome.emitted.append(selected.code_line)
            outcome.code_text = selected.code_line
            if not selected.code_line.endswith("\n"):
                outcome.finish = _FINISH_FROM_SAMPLE[selected.finish_reason]
            return outcome

    _greedy_to_line_end(provider, outcome, context, config, dist=dist)
    outcome.code_text = "".join(outcome.emitted)
    return outcome


def _greedy_to_line_end(
    provider: Provider,
    outcome: _LineOutcome,
    context: str,
    config: EngineConfig,
    dist: TokenDistribution | None,
) -> None:
    """Greedy argmax emission until a token carries a newline.

    When `dist` is given it is reused for the first pick, so measurement
    and the first greedy token share one provider call.
    """
    eos_id = provider.eos_token_id
    while True:
        if dist is None:
            dist = provider.next_distribution(context + "".join(outcome.emitted))
        top = dist.entries[0]
        if eos_id is not None and top.token_id == eos_id:
            outcome.finish = EngineFinish.END_OF_SEQUENCE
            return
        outcome.emit(top)
        if "\n" in top.token_text:
            return
        if len(outcome.token_ids) >= config.max_tokens_per_line:
            outcome.finish = EngineFinish.MAX_TOKENS
            return
        dist = None


def _generate_full(
    provider: Provider, prompt: str, config: EngineConfig
) -> GenerationResult:
    """Whole-body variant: sample k complete solutions, keep the one with
    the highest mean top-1/top-2 gap over all of its tokens."""
    cot = config.cot
    sample_prompt = build_cot_prompt(prompt, cot.examples, cot.comment_prefix)
    candidates = []
    try:
        for i in range(cot.k_samples):
            seed = config.seed + i
            completion = provider.sample_completion(
                sample_prompt,
                temperature=cot.temperature,
                stop=config.stop,
                max_tokens=cot.max_tokens,
                seed=seed,
            )
            text = completion.full_text
            confidence = mean_gap_over_span(completion, 0, len(text))
            candidates.append(
                CotCandidate(i, seed, text, (), "", confidence, completion.finish_reason)
            )
    except _PROVIDER_FAILURES as exc:
        partial = GenerationResult(prompt, (), EngineFinish.ERROR, config.mode)
        raise GenerationError(str(exc), partial) from exc
    scorable = [c for c in candidates if c.confidence is not None]
    if not scorable:
        partial = GenerationResult(prompt, (), EngineFinish.ERROR, config.mode)
        raise GenerationError("all sampled bodies were empty", partial)
    best = max(scorable, key=lambda c: c.confidence)
    record = LineRecord(
        index=0,
        pre_indent="",
        mid_line=False,
        distribution=None,
        uncertainty=None,
        gated=False,
        used_cot=True,
        fallback_used=False,
        candidates=tuple(candidates),
        selected_index=best.index,
        emitted_text=best.text,
        emitted_token_ids=(),
    )
    finish = _FINISH_FROM_SAMPLE[best.finish_reason]
    return GenerationResult(prompt, (record,), finish, config.mode)
