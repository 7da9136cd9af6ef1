import json
import math

import httpx
import pytest

from cotgate.errors import (
    CapabilityMissingError,
    InvalidConfigurationError,
    ProviderUnavailableError,
    ScenarioMissError,
)
from cotgate.providers.base import (
    Alternative,
    Completion,
    FinishReason,
    ProviderConfig,
    ProviderKind,
    TokenEvent,
    truncate_at_stop,
)
from cotgate.providers.http import AUTH_ENV_VAR, HttpProvider
from cotgate.providers.scenario import ScenarioBuilder, ScenarioProvider


def make_event(text: str, logprob: float = -0.1, token_id: int = 1) -> TokenEvent:
    return TokenEvent(
        token_id, text, logprob, (Alternative(token_id, text, logprob),)
    )


class TestBaseTypes:
    def test_completion_text_is_event_concatenation(self):
        events = (make_event("a"), make_event("b\n"))
        completion = Completion(events, FinishReason.STOP)
        assert completion.full_text == "ab\n"

    def test_event_alternatives_must_be_sorted(self):
        alts = (
            Alternative(1, "a", math.log(0.2)),
            Alternative(2, "b", math.log(0.7)),
        )
        with pytest.raises(InvalidConfigurationError):
            TokenEvent(1, "a", math.log(0.2), alts)

    def test_http_config_requires_endpoint(self):
        with pytest.raises(InvalidConfigurationError):
            ProviderConfig(kind=ProviderKind.HTTP, model_name="m")

    def test_top_k_floor(self):
        with pytest.raises(InvalidConfigurationError):
            ProviderConfig(kind=ProviderKind.SCENARIO, top_k_logprobs=1)

    def test_truncate_at_stop(self):
        events = tuple(make_event(t) for t in ("x = 1\n", "\n", "def f", "():\n"))
        kept, fired = truncate_at_stop(events, ["\ndef "])
        assert fired
        assert "".join(e.token_text for e in kept) == "x = 1\n"
        kept, fired = truncate_at_stop(events, ["zzz"])
        assert not fired
        assert len(kept) == 4


class TestScenarioProvider:
    @pytest.fixture()
    def builder(self) -> ScenarioBuilder:
        b = ScenarioBuilder(vocab_size=30, name="t")
        b.distribution("def f():\n", [("    return 1\n", 0.7), ("    return 2\n", 0.3)])
        b.eos("def f():\n    return 1\n")
        b.sample("def f():\n", 5, [("# hm\n", 0.5), ("    return 9\n", 0.6)])
        b.sample("def f():\n", "*", [("    return 1\n", 0.9)])
        return b

    def test_longest_suffix_wins(self, builder):
        builder.distribution("later def f():\n", [("    return 3\n", 1.0)])
        provider = builder.provider()
        dist = provider.next_distribution("prefix then later def f():\n")
        assert dist.entries[0].token_text == "    return 3\n"
        dist = provider.next_distribution("other def f():\n")
        assert dist.entries[0].token_text == "    return 1\n"

    def test_miss_raises(self, builder):
        provider = builder.provider()
        with pytest.raises(ScenarioMissError):
            provider.next_distribution("unknown context")
        with pytest.raises(ScenarioMissError):
            provider.sample_completion("unknown", 0.4, (), 10, 0)

    def test_entries_are_sorted_and_typed(self, builder):
        provider = builder.provider()
        dist = provider.next_distribution("def f():\n")
        assert dist.vocab_size == 30
        lps = [e.logprob for e in dist.entries]
        assert lps == sorted(lps, reverse=True)
        assert dist.entries[0].logprob == pytest.approx(math.log(0.7))

    def test_seed_branch_and_fallback(self, builder):
        provider = builder.provider()
        seeded = provider.sample_completion("def f():\n", 0.4, (), 10, 5)
        assert seeded.full_text == "# hm\n    return 9\n"
        other = provider.sample_completion("def f():\n", 0.4, (), 10, 123)
        assert other.full_text == "    return 1\n"

    def test_same_inputs_same_output(self, builder):
        provider = builder.provider()
        a = provider.sample_completion("def f():\n", 0.4, (), 10, 5)
        b = provider.sample_completion("def f():\n", 0.9, (), 10, 5)
        assert a == b  # temperature is part of the script, not the lookup

    def test_stop_truncation(self, builder):
        b = ScenarioBuilder(vocab_size=30, name="s")
        b.sample("p\n", 0, [("x = 1\n", 1.0), ("\n", 1.0), ("def g", 1.0)])
        provider = b.provider()
        completion = provider.sample_completion("p\n", 0.4, ("\ndef ",), 10, 0)
        assert completion.finish_reason is FinishReason.STOP
        assert completion.full_text == "x = 1\n"

    def test_max_tokens_truncation(self, builder):
        b = ScenarioBuilder(vocab_size=30, name="s")
        b.sample("p\n", 0, [(t, 1.0) for t in ("a", "b", "c", "d", "e", "f")])
        provider = b.provider()
        completion = provider.sample_completion("p\n", 0.4, (), 4, 0)
        assert completion.finish_reason is FinishReason.MAX_TOKENS
        assert len(completion.events) == 4
        assert completion.full_text == "abcd"

    def test_gap_synthesis(self, builder):
        provider = builder.provider()
        completion = provider.sample_completion("def f():\n", 0.4, (), 10, 5)
        event = completion.events[1]
        p1 = math.exp(event.alternatives[0].logprob)
        p2 = math.exp(event.alternatives[1].logprob)
        assert p1 - p2 == pytest.approx(0.6)
        assert p1 + p2 == pytest.approx(1.0)

    def test_sample_token_must_be_in_alts(self):
        doc = {
            "format_version": 1,
            "name": "bad",
            "vocab_size": 10,
            "eos_token_id": 0,
            "nodes": [
                {
                    "suffix": "p",
                    "samples": {
                        "0": {
                            "finish_reason": "stop",
                            "tokens": [
                                {

                                    "id": 1,
                                    "text": "x",
                                    "logprob": -0.1,
                                    "alts": [[2, "y", -0.1]],
                                }
                            ],
                        }
                    },
                }
            ],
        }
        with pytest.raises(InvalidConfigurationError):
            ScenarioProvider(doc)

    def test_wrong_format_version_rejected(self):
        with pytest.raises(InvalidConfigurationError):
            ScenarioProvider({"format_version": 99, "vocab_size": 10, "nodes": []})

    def test_greedy_chain_and_eos(self):
        b = ScenarioBuilder(vocab_size=20, name="chain")
        ctx = b.greedy_chain("q\n", ["    a = 1\n", "    return a\n"])
        b.eos(ctx)
        provider = b.provider()
        assert provider.next_distribution("q\n").entries[0].token_text == "    a = 1\n"
        end = provider.next_distribution("q\n    a = 1\n    return a\n")
        assert end.entries[0].token_id == provider.eos_token_id

    def test_identity_names_the_scenario(self, builder):
        assert builder.provider().identity == "scenario:t"


def _http_provider(handler, **overrides) -> HttpProvider:
    config = ProviderConfig(
        kind=ProviderKind.HTTP,
        endpoint="https://backend.test/v1/completions",
        model_name="coder-1",
        vocab_size=100,
        **overrides,
    )
    return HttpProvider(config, transport=httpx.MockTransport(handler))


class TestHttpProvider:
    def test_next_distribution_parses_top_logprobs(self):
        seen = {}

        def handler(request: httpx.Request) -> httpx.Response:
            seen["body"] = json.loads(request.content)
            return httpx.Response(
                200,
                json={
                    "choices": [
                        {
                            "text": "a",
                            "finish_reason": "length",
                            "logprobs": {
                                "tokens": ["a"],
                                "token_logprobs": [-0.5],
                                "top_logprobs": [
                                    {"a": -0.5, "b": -1.5, "c": -2.5}
                                ],
                            },
                        }
                    ]
                },
            )

        provider = _http_provider(handler)
        dist = provider.next_distribution("def f():\n")
        assert seen["body"]["max_tokens"] == 1
        assert seen["body"]["logprobs"] == 5
        assert seen["body"]["prompt"] == "def f():\n"
        assert [e.token_text for e in dist.entries] == ["a", "b", "c"]
        assert [e.token_id for e in dist.entries] == [0, 1, 2]
        assert dist.vocab_size == 100

    def test_sample_completion_builds_events(self):
        def handler(request: httpx.Request) -> httpx.Response:
            return httpx.Response(
                200,
                json={
                    "choices": [
                        {
                            "text": "xy",
                            "finish_reason": "stop",
                            "logprobs": {
                                "tokens": ["x", "y"],
                                "token_logprobs": [-0.2, -2.5],
                                "top_logprobs": [
                                    {"x": -0.2, "q": -1.9},
                                    # sampled token outside reported top-k
                                    {"z": -0.4, "w": -1.2},
                                ],
                            },
                        }
                    ]
                },
            )

        provider = _http_provider(handler)
        completion = provider.sample_completion("p", 0.4, ("\n\n",), 16, 7)
        assert completion.finish_reason is FinishReason.STOP
        assert completion.full_text == "xy"
        second = completion.events[1]
        assert second.token_text == "y"
        texts = [a.token_text for a in second.alternatives]
        assert "y" in texts  # merged in even though the server left it out
        lps = [a.logprob for a in second.alternatives]
        assert lps == sorted(lps, reverse=True)

    def test_missing_logprobs_is_capability_error(self):
        def handler(request: httpx.Request) -> httpx.Response:
            return httpx.Response(
                200,
                json={"choices": [{"text": "a", "finish_reason": "stop"}]},
            )

        provider = _http_provider(handler)
        with pytest.raises(CapabilityMissingError):
            provider.next_distribution("p")

    def test_retries_then_unavailable(self):
        calls = {"n": 0}

        def handler(request: httpx.Request) -> httpx.Response:
            calls["n"] += 1
            return httpx.Response(503, text="overloaded")

        provider = _http_provider(handler, retry_limit=2)
        with pytest.raises(ProviderUnavailableError):
            provider.next_distribution("p")
        assert calls["n"] == 3

    def test_transport_error_retries_same_payload(self):
        bodies = []

        def handler(request: httpx.Request) -> httpx.Response:
            bodies.append(request.content)
            if len(bodies) == 1:
                raise httpx.ConnectError("boom")
            return httpx.Response(
                200,
                json={
                    "choices": [
                        {
                            "text": "a",
                            "finish_reason": "stop",
                            "logprobs": {
                                "tokens": ["a"],
                                "token_logprobs": [-0.1],
                                "top_logprobs": [{"a": -0.1, "b": -3.0}],
                            },
                        }
                    ]
                },
            )

        provider = _http_provider(handler, retry_limit=1)
        provider.next_distribution("p")
        assert len(bodies) == 2
        assert bodies[0] == bodies[1]

    def test_client_error_does_not_retry(self):
        calls = {"n": 0}

        def handler(request: httpx.Request) -> httpx.Response:
            calls["n"] += 1
            return httpx.Response(400, text="bad request")

        provider = _http_provider(handler, retry_limit=3)
        with pytest.raises(ProviderUnavailableError):
            provider.next_distribution("p")
        assert calls["n"] == 1

    def test_auth_token_from_env(self, monkeypatch):
        monkeypatch.setenv(AUTH_ENV_VAR, "sekrit")
        headers = {}

        def handler(request: httpx.Request) -> httpx.Response:
            headers["auth"] = request.headers.get("authorization")
            return httpx.Response(
                200,
                json={
                    "choices": [
                        {
                            "text": "a",
                            "finish_reason": "stop",
                            "logprobs": {
                                "tokens": ["a"],
                                "token_logprobs": [-0.2],
                                "top_logprobs": [{"a": -0.2, "b": -2.5}],
                            },
                        }
                    ]
                },
            )

        provider = _http_provider(handler)
        provider.next_distribution("p")
        assert headers["auth"] == "Bearer sekrit"

    def test_identity_includes_model_and_endpoint(self):
        provider = _http_provider(lambda request: httpx.Response(500))
        assert provider.identity == (
            "http:coder-1@https://backend.test/v1/completions"
        )
