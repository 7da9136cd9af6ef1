"""Per-position uncertainty measures and the threshold gate.

Everything here is a pure function of an immutable `TokenDistribution`, so
callers may share values freely across threads.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import InvalidConfigurationError, InvalidDistributionError

# Tolerance for probability mass bookkeeping on float inputs.
MASS_SLACK = 1e-6


class Measure(str, enum.Enum):
    ENTROPY = "entropy"
    PROBABILITY_DIFFERENTIAL = "pd"


class TruncationMode(str, enum.Enum):
    """How to treat probability mass missing from a truncated distribution.

    RESIDUAL_UNIFORM spreads the unseen mass uniformly over the tokens the
    backend did not report, which upper-bounds the true entropy and therefore
    errs toward triggering reasoning. RENORMALIZE rescales the reported
    entries to sum to one and ignores the unseen tail.
    """

    RESIDUAL_UNIFORM = "residual_uniform"
    RENORMALIZE = "renormalize"


class DistributionEntry(NamedTuple):
    token_id: int
    token_text: str
    logprob: float


@dataclass(frozen=True)
class TokenDistribution:
    """Next-token distribution at one position, possibly truncated to top-K.

    `entries` must be sorted by logprob descending and carry at most the full
    vocabulary's mass. `truncated` is derived: the backend reported fewer
    entries than the vocabulary holds.
    """

    entries: tuple[DistributionEntry, ...]
    vocab_size: int

    def __post_init__(self):
        if not self.entries:
            raise InvalidDistributionError("distribution has no entries")
        if self.vocab_size < len(self.entries):
            raise InvalidDistributionError(
                f"vocab_size {self.vocab_size} < {len(self.entries)} entries"
            )
        last = math.inf
        for e in self.entries:
            if e.logprob > last:
                raise InvalidDistributionError("logprobs are not non-increasing")
            last = e.logprob
        if self.total_mass() > 1.0 + MASS_SLACK:
            raise InvalidDistributionError(
                f"probability mass {self.total_mass():.9f} exceeds 1"
            )

    @property
    def truncated(self) -> bool:
        return len(self.entries) < self.vocab_size

    def total_mass(self) -> float:
        return math.fsum(math.exp(e.logprob) for e in self.entries)

    def probs(self) -> list[float]:
        return [math.exp(e.logprob) for e in self.entries]

    @classmethod
    def from_probs(
        cls,
        probs: list[float] | tuple[float, ...],
        vocab_size: int | None = None,
        token_ids: list[int] | None = None,
        token_texts: list[str] | None = None,
    ) -> "TokenDistribution":
        """Build a distribution from plain probabilities (zeros are dropped)."""
        ids = token_ids if token_ids is not None else list(range(len(probs)))
        texts = token_texts if token_texts is not None else [f"tok{i}" for i in ids]
        entries = [
            DistributionEntry(i, t, math.log(p))
            for i, t, p in zip(ids, texts, probs)
            if p > 0.0
        ]
        entries.sort(key=lambda e: (-e.logprob, e.token_id))
        return cls(tuple(entries), vocab_size if vocab_size is not None else len(probs))


@dataclass(frozen=True)
class UncertaintyScore:
    """A normalized uncertainty value in [0, 1] plus how it was obtained."""

    value: float
    measure: Measure
    raw_entropy_nats: float | None = field(default=None)


def shannon_entropy(
    dist: TokenDistribution,
    truncation_mode: TruncationMode = TruncationMode.RESIDUAL_UNIFORM,
) -> float:
    """Entropy of the distribution in nats, with 0*log(0) taken as 0.

    For truncated distributions the unseen mass is handled per
    `truncation_mode`. Equal-logprob distributions short-circuit to log(n),
    which the summed form would miss by a few ulps.
    """
    probs = dist.probs()
    residual = 1.0 - math.fsum(probs)
    if residual < -MASS_SLACK:
        raise InvalidDistributionError(
            f"probability mass exceeds 1 by {-residual:.3e}"
        )
    residual = max(residual, 0.0)

    first_lp = dist.entries[0].logprob
    if abs(residual) <= MASS_SLACK and all(
        e.logprob == first_lp for e in dist.entries
    ):
        return math.log(len(dist.entries))

    if dist.truncated and truncation_mode is TruncationMode.RENORMALIZE:
        total = math.fsum(probs)
        probs = [p / total for p in probs]
        residual = 0.0

    terms = [-p * math.log(p) for p in probs if p > 0.0]
    if dist.truncated and truncation_mode is TruncationMode.RESIDUAL_UNIFORM:
        unseen = dist.vocab_size - len(dist.entries)
        if residual > 0.0 and unseen > 0:
            q = residual / unseen
            terms.append(-residual * math.log(q))
    return max(math.fsum(terms), 0.0)


def entropy_uncertainty(
    dist: TokenDistribution,
    truncation_mode: TruncationMode = TruncationMode.RESIDUAL_UNIFORM,
) -> UncertaintyScore:
    """Entropy normalized by log(vocab_size), so the value lands in [0, 1]."""
    if dist.vocab_size < 2:
        raise InvalidConfigurationError(
            "entropy normalization needs vocab_size >= 2"
        )
    raw = shannon_entropy(dist, truncation_mode)
    value = min(max(raw / math.log(dist.vocab_size), 0.0), 1.0)
    return UncertaintyScore(value, Measure.ENTROPY, raw_entropy_nats=raw)


def pd_uncertainty(dist: TokenDistribution) -> UncertaintyScore:
    """One minus the top-1/top-2 probability gap; a lone entry implies top-2 = 0."""
    p1 = math.exp(dist.entries[0].logprob)
    p2 = math.exp(dist.entries[1].logprob) if len(dist.entries) > 1 else 0.0
    value = min(max(1.0 - (p1 - p2), 0.0), 1.0)
    return UncertaintyScore(value, Measure.PROBABILITY_DIFFERENTIAL)


def gate(score: UncertaintyScore, tau: float) -> bool:
    """True when uncertainty strictly exceeds tau; ties stay on the greedy path."""
    return score.value > tau
