"""Trace files: one JSONL record per generated line, plus a header.

A trace stores each line's measured distribution verbatim, so the gating
decision can be recomputed offline from the file alone and checked
against what the engine recorded. Floats are serialized via repr and
round-trip exactly, which makes the replay bit-for-bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple

from .cot import CotCandidate
from .engine import EngineConfig, GenerationResult, LineRecord
from .errors import InvalidConfigurationError
from .uncertainty import (
    DistributionEntry,
    Measure,
    TokenDistribution,
    TruncationMode,
    UncertaintyScore,
    entropy_uncertainty,
    gate,
    pd_uncertainty,
)

TRACE_FORMAT = 1


def config_snapshot(config: EngineConfig) -> dict:
    return {
        "mode": config.mode.value,
        "measure": config.measure.value,
        "tau": config.tau,
        "truncation_mode": config.truncation_mode.value,
        "stop": list(config.stop),
        "dedent_stop": config.dedent_stop,
        "max_lines": config.max_lines,
        "max_tokens_per_line": config.max_tokens_per_line,
        "seed": config.seed,
        "cot": {
            "k_samples": config.cot.k_samples,
            "temperature": config.cot.temperature,
            "max_tokens": config.cot.max_tokens,
            "comment_prefix": config.cot.comment_prefix,
            "example_count": len(config.cot.examples),
        },
    }


def _distribution_to_json(dist: TokenDistribution | None) -> dict | None:
    if dist is None:
        return None
    return {
        "vocab_size": dist.vocab_size,
        "entries": [[e.token_id, e.token_text, e.logprob] for e in dist.entries],
    }


def _distribution_from_json(raw: dict | None) -> TokenDistribution | None:
    if raw is None:
        return None
    entries = tuple(
        DistributionEntry(int(tid), text, float(lp))
        for tid, text, lp in raw["entries"]
    )
    return TokenDistribution(entries, int(raw["vocab_size"]))


def _uncertainty_to_json(score: UncertaintyScore | None) -> dict | None:
    if score is None:
        return None
    return {
        "value": score.value,
        "measure": score.measure.value,
        "raw_entropy_nats": score.raw_entropy_nats,
    }


def _candidate_to_json(candidate: CotCandidate) -> dict:
    return {
        "index": candidate.index,
        "seed": candidate.seed,
        "reasoning": list(candidate.reasoning),
        "code_line": candidate.code_line,
        "confidence": candidate.confidence,
        "finish_reason": candidate.finish_reason.value,
        "text": candidate.text,
    }


def _line_to_json(record: LineRecord) -> dict:
    return {
        "kind": "line",
        "index": record.index,
        "pre_indent": record.pre_indent,
        "mid_line": record.mid_line,
        "distribution": _distribution_to_json(record.distribution),
        "uncertainty": _uncertainty_to_json(record.uncertainty),
        "gated": record.gated,
        "used_cot": record.used_cot,
        "fallback_used": record.fallback_used,
        "candidates": [_candidate_to_json(c) for c in record.candidates],
        "selected_index": record.selected_index,
        "emitted_text": record.emitted_text,
        "emitted_token_ids": list(record.emitted_token_ids),
    }


def serialize_trace(
    result: GenerationResult, config: EngineConfig, provider_identity: str
) -> list[str]:
    """The trace as a list of JSON strings, header first."""
    header = {
        "kind": "header",
        "trace_format": TRACE_FORMAT,
        "provider": provider_identity,
        "prompt": result.prompt,
        "finish": result.finish.value,
        "config": config_snapshot(config),
    }
    out = [json.dumps(header, ensure_ascii=False)]
    out.extend(
        json.dumps(_line_to_json(r), ensure_ascii=False) for r in result.records
    )
    return out


def write_trace(
    path: str | Path,
    result: GenerationResult,
    config: EngineConfig,
    provider_identity: str,
) -> None:
    lines = serialize_trace(result, config, provider_identity)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


@dataclass(frozen=True)
class Trace:
    header: dict
    lines: tuple[dict, ...]

    @property
    def completion_text(self) -> str:
        return "".join(line["emitted_text"] for line in self.lines)


def parse_trace(text_lines: Iterable[str]) -> Trace:
    records = [json.loads(line) for line in text_lines if line.strip()]
    if not records or records[0].get("kind") != "header":
        raise InvalidConfigurationError("trace must start with a header record")
    header = records[0]
    if header.get("trace_format") != TRACE_FORMAT:
        raise InvalidConfigurationError(
            f"unsupported trace_format {header.get('trace_format')!r}"
        )
    lines = tuple(r for r in records[1:] if r.get("kind") == "line")
    return Trace(header, lines)


def load_trace(path: str | Path) -> Trace:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_trace(fh)


class ReplayRow(NamedTuple):
    index: int
    recorded_value: float
    replayed_value: float
    recorded_gated: bool
    replayed_gated: bool

    @property
    def match(self) -> bool:
        return (
            self.recorded_gated == self.replayed_gated
            and self.recorded_value == self.replayed_value
        )


def replay_gating(trace: Trace) -> list[ReplayRow]:
    """Recompute each measured line's uncertainty and gate from the stored
    distribution and the header's config, next to what was recorded."""
    cfg = trace.header["config"]
    measure = Measure(cfg["measure"])
    truncation = TruncationMode(cfg["truncation_mode"])
    tau = float(cfg["tau"])
    rows = []
    for line in trace.lines:
        dist = _distribution_from_json(line["distribution"])
        recorded = line["uncertainty"]
        if dist is None or recorded is None:
            continue
        if measure is Measure.ENTROPY:
            score = entropy_uncertainty(dist, truncation)
        else:
            score = pd_uncertainty(dist)
        rows.append(
            ReplayRow(
                index=line["index"],
                recorded_value=float(recorded["value"]),
                replayed_value=score.value,
                recorded_gated=bool(line["gated"]),
                replayed_gated=gate(score, tau),
            )
        )
    return rows


def gated_line_indices(trace: Trace) -> list[int]:
    return [row.index for row in replay_gating(trace) if row.replayed_gated]


def _preview(text: str, width: int = 44) -> str:
    shown = repr(text)
    if len(shown) > width:
        shown = shown[: width - 3] + "..."
    return shown


def render_table(trace: Trace) -> str:
    """Fixed-width per-line summary for terminal inspection."""
    cfg = trace.header["config"]
    head = (
        f"provider={trace.header['provider']}  mode={cfg['mode']}  "
        f"measure={cfg['measure']}  tau={cfg['tau']}  "
        f"finish={trace.header['finish']}"
    )
    rows = [head, ""]
    rows.append(
        f"{'line':>4}  {'value':>8}  {'gate':>5}  {'action':<8}  "
        f"{'conf':>8}  emitted"
    )
    for line in trace.lines:
        unc = line["uncertainty"]
        value = f"{unc['value']:.4f}" if unc else "-"
        gated = "yes" if line["gated"] else "no"
        if line["fallback_used"]:
            action = "fallback"
        elif line["used_cot"]:
            action = "branch"
        elif line["mid_line"]:
            action = "carry"
        else:
            action = "greedy"
        conf = "-"
        if line["selected_index"] is not None and line["candidates"]:
            chosen = line["candidates"][line["selected_index"]]
            if chosen["confidence"] is not None:
                conf = f"{chosen['confidence']:.4f}"
        rows.append(
            f"{line['index']:>4}  {value:>8}  {gated:>5}  {action:<8}  "
            f"{conf:>8}  {_preview(line['emitted_text'])}"
        )
    return "\n".join(rows)
