"""Token-distribution backend interface shared by all providers.

A provider serves two needs with one distribution shape: top-K entries at
line-start measurement points and top-2 alternatives at every sampled
position. Providers must tolerate concurrent independent requests.
"""

from __future__ import annotations

import enum
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from ..errors import InvalidConfigurationError
from ..uncertainty import TokenDistribution


class Alternative(NamedTuple):
    token_id: int
    token_text: str
    logprob: float


@dataclass(frozen=True)
class TokenEvent:
    """One emitted token plus the top alternatives at its position."""

    token_id: int
    token_text: str
    logprob: float
    alternatives: tuple[Alternative, ...] = ()

    def __post_init__(self):
        lps = [a.logprob for a in self.alternatives]
        if lps != sorted(lps, reverse=True):
            raise InvalidConfigurationError("alternatives must be sorted by logprob")


class FinishReason(str, enum.Enum):
    STOP = "stop"
    MAX_TOKENS = "max_tokens"
    END_OF_SEQUENCE = "end_of_sequence"


@dataclass(frozen=True)
class Completion:
    """A sampled continuation; full_text is exactly the concatenated tokens."""

    events: tuple[TokenEvent, ...]
    finish_reason: FinishReason

    @property
    def full_text(self) -> str:
        return "".join(e.token_text for e in self.events)


class ProviderKind(str, enum.Enum):
    SCENARIO = "scenario"
    HTTP = "http"


@dataclass(frozen=True)
class ProviderConfig:
    kind: ProviderKind
    endpoint: str | None = None
    model_name: str | None = None
    top_k_logprobs: int = 5
    vocab_size: int = 32000
    request_timeout_s: float = 60.0
    retry_limit: int = 2
    auth_token: str | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind is ProviderKind.HTTP and not self.endpoint:
            raise InvalidConfigurationError("http provider requires an endpoint")
        if self.kind is not ProviderKind.HTTP and self.endpoint:
            raise InvalidConfigurationError("endpoint is only valid for http providers")
        if self.top_k_logprobs < 2:
            raise InvalidConfigurationError("top_k_logprobs must be >= 2")
        if self.vocab_size < self.top_k_logprobs:
            raise InvalidConfigurationError("vocab_size must be >= top_k_logprobs")


class Provider(ABC):
    """Abstract completion backend."""

    @property
    @abstractmethod
    def identity(self) -> str:
        """Stable description used in trace headers."""

    @property
    def eos_token_id(self) -> int | None:
        return None

    @abstractmethod
    def next_distribution(self, context: str) -> TokenDistribution:
        """Top-K next-token distribution conditioned on `context`."""

    @abstractmethod
    def sample_completion(
        self,
        context: str,
        temperature: float,
        stop: Sequence[str],
        max_tokens: int,
        seed: int,
    ) -> Completion:
        """One temperature sample whose events all carry top alternatives."""

    def greedy_token(self, context: str) -> TokenEvent:
        """Argmax token of the next distribution; ties break on lowest id."""
        dist = self.next_distribution(context)
        top_lp = dist.entries[0].logprob
        best = min(
            (e for e in dist.entries if e.logprob == top_lp),
            key=lambda e: e.token_id,
        )
        alts = tuple(Alternative(*e) for e in dist.entries)
        return TokenEvent(best.token_id, best.token_text, best.logprob, alts)


def truncate_at_stop(
    events: Sequence[TokenEvent], stop: Sequence[str]
) -> tuple[tuple[TokenEvent, ...], bool]:
    """Cut an event stream before the earliest stop-string occurrence.

    Matching runs on the concatenated text; the event containing the start of
    the match, and everything after it, is dropped. Returns the kept events
    and whether a stop fired.
    """
    if not stop:
        return tuple(events), False
    text = "".join(e.token_text for e in events)
    hits = [text.find(s) for s in stop if s]
    hits = [h for h in hits if h >= 0]
    if not hits:
        return tuple(events), False
    cut = min(hits)
    kept: list[TokenEvent] = []
    offset = 0
    for e in events:
        if offset + len(e.token_text) > cut:
            break
        kept.append(e)
        offset += len(e.token_text)
    return tuple(kept), True
