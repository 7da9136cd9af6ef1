from __future__ import annotations

import json
import time
from importlib import resources

import pytest
from hypothesis import HealthCheck, settings

from cotgate.bench import Problem, load_problems
from cotgate.providers.scenario import ScenarioProvider

settings.register_profile(
    "suite",
    derandomize=True,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

SESSION_START = time.monotonic()


@pytest.fixture(scope="session", autouse=True)
def _suite_time_budget():
    # The scripted suite must stay fast enough to run on every change.
    yield
    elapsed = time.monotonic() - SESSION_START
    assert elapsed < 60.0, f"suite took {elapsed:.1f}s, budget is 60s"


def _bundled_json(relpath: str) -> dict:
    text = resources.files("cotgate").joinpath(relpath).read_text(encoding="utf-8")
    return json.loads(text)


@pytest.fixture(scope="session")
def dp_provider() -> ScenarioProvider:
    return ScenarioProvider(_bundled_json("data/scenarios/dp_vs_greedy.json"))


@pytest.fixture(scope="session")
def toy_provider() -> ScenarioProvider:
    return ScenarioProvider(_bundled_json("data/scenarios/toy_suite.json"))


@pytest.fixture(scope="session")
def toy_problems() -> tuple[Problem, ...]:
    with resources.as_file(
        resources.files("cotgate").joinpath("data/datasets/toy5.jsonl")
    ) as path:
        return load_problems(path)
