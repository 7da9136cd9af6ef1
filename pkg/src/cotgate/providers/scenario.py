"""Deterministic scripted provider driven by a JSON suffix-trie file.

The file maps exact context suffixes to next-token distributions and to
seed-keyed sample branches, so any decoding session can be reproduced
offline byte for byte. Schema (format_version 1):

    {
      "format_version": 1,
      "name": "fixture name",
      "vocab_size": 50,
      "eos_token_id": 0,
      "prompts": {"label": "prompt text", ...},      # optional metadata
      "nodes": [
        {
          "suffix": "exact context suffix to match",
          "distribution": {"entries": [[token_id, token_text, logprob], ...]},
          "samples": {
            "7":  {"finish_reason": "stop",
                   "tokens": [{"id": 3, "text": "x\n", "logprob": -0.1,
                               "alts": [[3, "x\n", -0.1], [4, "y\n", -2.4]]}]},
            "*":  { ... fallback branch for any other seed ... }
          }
        },
        ...
      ]
    }

Lookup picks the node with the longest suffix matching the query context;
a context (or a seed) with no scripted branch raises ScenarioMissError
rather than improvising.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Sequence

from ..errors import InvalidConfigurationError, ScenarioMissError
from ..uncertainty import DistributionEntry, TokenDistribution
from .base import (
    Alternative,
    Completion,
    FinishReason,
    Provider,
    TokenEvent,
    truncate_at_stop,
)

FORMAT_VERSION = 1


def _context_excerpt(context: str, limit: int = 60) -> str:
    tail = context[-limit:]
    return ("..." if len(context) > limit else "") + repr(tail)


class ScenarioProvider(Provider):
    """Pure-function provider: (file, context, seed) fully determine output."""

    def __init__(self, source: str | Path | dict):
        if isinstance(source, (str, Path)):
            with open(source, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
            self._origin = str(source)
        else:
            doc = source
            self._origin = "<dict>"
        version = doc.get("format_version")
        if version != FORMAT_VERSION:
            raise InvalidConfigurationError(
                f"unsupported scenario format_version {version!r}"
            )
        self.name: str = doc.get("name", "unnamed")
        self.vocab_size: int = int(doc["vocab_size"])
        self._eos_token_id = doc.get("eos_token_id")
        self.prompts: dict[str, str] = dict(doc.get("prompts", {}))
        self._dist_nodes: dict[str, TokenDistribution] = {}
        self._sample_nodes: dict[str, dict[str, Completion]] = {}
        for node in doc.get("nodes", []):
            suffix = node["suffix"]
            if "distribution" in node:
                self._dist_nodes[suffix] = self._parse_distribution(
                    node["distribution"]
                )
            if "samples" in node:
                self._sample_nodes[suffix] = {
                    seed_key: self._parse_completion(branch)
                    for seed_key, branch in node["samples"].items()
                }

    @property
    def identity(self) -> str:
        return f"scenario:{self.name}"

    @property
    def eos_token_id(self) -> int | None:
        return self._eos_token_id

    def _parse_distribution(self, raw: dict) -> TokenDistribution:
        entries = [
            DistributionEntry(int(tid), text, float(lp))
            for tid, text, lp in raw["entries"]
        ]
        entries.sort(key=lambda e: (-e.logprob, e.token_id))
        return TokenDistribution(tuple(entries), self.vocab_size)

    def _parse_completion(self, raw: dict) -> Completion:
        events = []
        for tok in raw["tokens"]:
            alts = tuple(
                Alternative(int(tid), text, float(lp))
                for tid, text, lp in tok["alts"]
            )
            if not any(
                a.token_id == int(tok["id"]) and a.token_text == tok["text"]
                for a in alts
            ):
                raise InvalidConfigurationError(
                    f"sampled token {tok['text']!r} missing from its alternatives"
                )
            events.append(
                TokenEvent(int(tok["id"]), tok["text"], float(tok["logprob"]), alts)
            )
        reason = FinishReason(raw.get("finish_reason", "end_of_sequence"))
        return Completion(tuple(events), reason)

    def _longest_suffix(self, table: dict, context: str, what: str) -> str:
        best = None
        for suffix in table:
            if context.endswith(suffix):
                if best is None or len(suffix) > len(best):
                    best = suffix
        if best is None:
            raise ScenarioMissError(
                f"scenario {self.name!r} has no {what} node for context tail "
                f"{_context_excerpt(context)}"
            )
        return best

    def next_distribution(self, context: str) -> TokenDistribution:
        if not context:
            raise InvalidConfigurationError("context must be non-empty")
        key = self._longest_suffix(self._dist_nodes, context, "distribution")
        return self._dist_nodes[key]

    def sample_completion(
        self,
        context: str,
        temperature: float,
        stop: Sequence[str],
        max_tokens: int,
        seed: int,
    ) -> Completion:
        # Scripted branches encode post-temperature sampling outcomes, so
        # the temperature argument does not alter lookup.
        if not context:
            raise InvalidConfigurationError("context must be non-empty")
        if max_tokens < 1:
            raise InvalidConfigurationError("max_tokens must be >= 1")
        key = self._longest_suffix(self._sample_nodes, context, "sample")
        branches = self._sample_nodes[key]
        branch = branches.get(str(seed), branches.get("*"))
        if branch is None:
            raise ScenarioMissError(
                f"scenario {self.name!r} node {_context_excerpt(key)} has no "
                f"branch for seed {seed}"
            )
        events, stopped = truncate_at_stop(branch.events, stop)
        if len(events) > max_tokens:
            return Completion(events[:max_tokens], FinishReason.MAX_TOKENS)
        if stopped:
            return Completion(events, FinishReason.STOP)
        return Completion(events, branch.finish_reason)


class ScenarioBuilder:
    """Programmatic author for scenario files.

    Token ids are interned per distinct text, starting after the reserved
    EOS id, so rebuilt files are byte-stable.
    """

    EOS_TEXT = "<eos>"

    def __init__(self, vocab_size: int, name: str, eos_token_id: int = 0):
        self.vocab_size = vocab_size
        self.name = name
        self.eos_token_id = eos_token_id
        self._token_ids: dict[str, int] = {self.EOS_TEXT: eos_token_id}
        self._nodes: dict[str, dict] = {}
        self.prompts: dict[str, str] = {}

    def token_id(self, text: str) -> int:
        if text not in self._token_ids:
            self._token_ids[text] = len(self._token_ids)
        return self._token_ids[text]

    def _node(self, suffix: str) -> dict:
        return self._nodes.setdefault(suffix, {"suffix": suffix})

    def distribution(self, context: str, choices: list[tuple[str, float]]) -> None:
        """Script the next-token distribution at `context`.

        `choices` are (token_text, probability) pairs; EOS_TEXT is allowed.
        """
        entries = [
            [self.token_id(text), text, math.log(p)] for text, p in choices if p > 0
        ]
        entries.sort(key=lambda e: (-e[2], e[0]))
        self._node(context)["distribution"] = {"entries": entries}

    def eos(self, context: str) -> None:
        self.distribution(context, [(self.EOS_TEXT, 1.0)])

    def greedy_chain(
        self, context: str, lines: list[str], split_indent: bool = False
    ) -> str:
        """Script a forced one-hot path emitting `lines`; returns the new context.

        With split_indent, a line's leading indentation becomes its own token
        so the engine's indentation pre-emission step is exercised.
        """
        ctx = context
        for line in lines:
            if split_indent:
                stripped = line.lstrip(" \t")
                indent = line[: len(line) - len(stripped)]
                if indent:
                    self.distribution(ctx, [(indent, 1.0)])
                    ctx += indent
                line = stripped
            if line:
                self.distribution(ctx, [(line, 1.0)])
                ctx += line
        return ctx

    def sample(
        self,
        context: str,
        seed: int | str,
        segments: list[tuple[str, float]],
        finish_reason: str = "end_of_sequence",
    ) -> None:
        """Script one seeded sample branch at `context`.

        `segments` are (token_text, gap) pairs; each token's top-2
        alternatives are synthesized as p1 = (1 + gap) / 2 and
        p2 = (1 - gap) / 2 so the top-1/top-2 probability gap is exactly
        `gap`. A gap of 1.0 produces a one-hot position.
        """
        tokens = []
        for text, gap in segments:
            if not 0.0 <= gap <= 1.0:
                raise InvalidConfigurationError(f"gap {gap} outside [0, 1]")
            p1 = (1.0 + gap) / 2.0
            tid = self.token_id(text)
            alts = [[tid, text, math.log(p1)]]
            if gap < 1.0:
                p2 = (1.0 - gap) / 2.0
                alt_text = f"~{text}"
                alts.append([self.token_id(alt_text), alt_text, math.log(p2)])
            tokens.append(
                {"id": tid, "text": text, "logprob": math.log(p1), "alts": alts}
            )
        node = self._node(context)
        node.setdefault("samples", {})[str(seed)] = {
            "finish_reason": finish_reason,
            "tokens": tokens,
        }

    def add_prompt(self, label: str, prompt: str) -> None:
        self.prompts[label] = prompt

    def build(self) -> dict:
        doc = {
            "format_version": FORMAT_VERSION,
            "name": self.name,
            "vocab_size": self.vocab_size,
            "eos_token_id": self.eos_token_id,
            "nodes": [self._nodes[k] for k in sorted(self._nodes)],
        }
        if self.prompts:
            doc["prompts"] = self.prompts
        return doc

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.build(), fh, indent=1, ensure_ascii=False)
            fh.write("\n")

    def provider(self) -> ScenarioProvider:
        return ScenarioProvider(self.build())
