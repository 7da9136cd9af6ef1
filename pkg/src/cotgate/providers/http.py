"""Completions-style HTTP backend with per-token top-k logprobs.

The wire format is the classic text-completions shape: POST a JSON body
with `prompt`, `max_tokens`, `temperature`, `stop`, `logprobs` and `seed`,
read back `choices[0].text` plus parallel arrays under `choices[0].logprobs`.
That API reports token *text* only, so token ids are synthesized as the
token's rank within each returned top-k map; ids are therefore stable per
position but not comparable across positions. All downstream math keys on
probabilities and token text, not ids.
"""

from __future__ import annotations

import os
from typing import Sequence

import httpx

from ..errors import (
    CapabilityMissingError,
    InvalidConfigurationError,
    ProviderUnavailableError,
)
from ..uncertainty import DistributionEntry, TokenDistribution
from .base import (
    Alternative,
    Completion,
    FinishReason,
    Provider,
    ProviderConfig,
    ProviderKind,
    TokenEvent,
)

AUTH_ENV_VAR = "COTGATE_API_TOKEN"

_FINISH_MAP = {
    "stop": FinishReason.STOP,
    "length": FinishReason.MAX_TOKENS,
}


class HttpProvider(Provider):
    """Thin, retrying client around one completions endpoint.

    Requests carry no client-side state, so a retry after a transport
    failure or 5xx re-issues the identical payload.
    """

    def __init__(
        self,
        config: ProviderConfig,
        transport: httpx.BaseTransport | None = None,
    ):
        if config.kind is not ProviderKind.HTTP:
            raise InvalidConfigurationError("HttpProvider requires kind=http")
        if not config.model_name:
            raise InvalidConfigurationError("HttpProvider requires model_name")
        self.config = config
        headers = {}
        token = config.auth_token or os.environ.get(AUTH_ENV_VAR)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = httpx.Client(
            timeout=config.request_timeout_s,
            headers=headers,
            transport=transport,
        )

    @property
    def identity(self) -> str:
        return f"http:{self.config.model_name}@{self.config.endpoint}"

    @property
    def vocab_size(self) -> int:
        return self.config.vocab_size

    def close(self) -> None:
        self._client.close()

    def _post(self, body: dict) -> dict:
        last_error: Exception | None = None
        for _ in range(self.config.retry_limit + 1):
            try:
                response = self._client.post(self.config.endpoint, json=body)
            except httpx.TransportError as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = ProviderUnavailableError(
                    f"server error {response.status_code}"
                )
                continue
            if response.status_code != 200:
                raise ProviderUnavailableError(
                    f"endpoint returned {response.status_code}: "
                    f"{response.text[:200]}"
                )
            return response.json()
        raise ProviderUnavailableError(
            f"request failed after {self.config.retry_limit + 1} attempts: "
            f"{last_error}"
        )

    def _body(
        self,
        context: str,
        max_tokens: int,
        temperature: float,
        stop: Sequence[str],
        seed: int | None,
    ) -> dict:
        body = {
            "model": self.config.model_name,
            "prompt": context,
            "max_tokens": max_tokens,
            "temperature": temperature,
            "logprobs": self.config.top_k_logprobs,
            "echo": False,
        }
        if stop:
            body["stop"] = list(stop)
        if seed is not None:
            body["seed"] = seed
        return body

    @staticmethod
    def _logprobs_block(choice: dict) -> dict:
        block = choice.get("logprobs")
        if not block or block.get("top_logprobs") is None:
            raise CapabilityMissingError(
                "backend response carries no per-token top logprobs; "
                "uncertainty measurement needs them"
            )
        return block

    @staticmethod
    def _ranked(top_map: dict) -> list[tuple[str, float]]:
        # Rank order ties on token text so synthesized ids are reproducible.
        return sorted(top_map.items(), key=lambda kv: (-kv[1], kv[0]))

    def next_distribution(self, context: str) -> TokenDistribution:
        if not context:
            raise InvalidConfigurationError("context must be non-empty")
        body = self._body(context, 1, 0.0, (), None)
        data = self._post(body)
        choice = data["choices"][0]
        block = self._logprobs_block(choice)
        tops = block["top_logprobs"]
        if not tops or not tops[0]:
            raise CapabilityMissingError("empty top_logprobs for next token")
        entries = tuple(
            DistributionEntry(rank, text, float(lp))
            for rank, (text, lp) in enumerate(self._ranked(tops[0]))
        )
        return TokenDistribution(entries, self.config.vocab_size)

    def sample_completion(
        self,
        context: str,
        temperature: float,
        stop: Sequence[str],
        max_tokens: int,
        seed: int,
    ) -> Completion:
        if not context:
            raise InvalidConfigurationError("context must be non-empty")
        if max_tokens < 1:
            raise InvalidConfigurationError("max_tokens must be >= 1")
        body = self._body(context, max_tokens, temperature, stop, seed)
        data = self._post(body)
        choice = data["choices"][0]
        block = self._logprobs_block(choice)
        tokens = block.get("tokens") or []
        token_lps = block.get("token_logprobs") or []
        tops = block.get("top_logprobs") or []
        if not (len(tokens) == len(token_lps) == len(tops)):
            raise ProviderUnavailableError("ragged logprobs arrays in response")
        events = []
        for text, lp, top_map in zip(tokens, token_lps, tops):
            if lp is None or top_map is None:
                raise CapabilityMissingError(
                    "backend omitted logprobs for a sampled token"
                )
            merged = dict(top_map)
            # The sampled token may fall outside the reported top-k.
            if text not in merged:
                merged[text] = float(lp)
            ranked = self._ranked(merged)
            alts = tuple(
                Alternative(rank, t, float(v)) for rank, (t, v) in enumerate(ranked)
            )
            own_rank = next(i for i, (t, _) in enumerate(ranked) if t == text)
            events.append(TokenEvent(own_rank, text, float(lp), alts))
        reason = _FINISH_MAP.get(
            choice.get("finish_reason"), FinishReason.END_OF_SEQUENCE
        )
        return Completion(tuple(events), reason)
