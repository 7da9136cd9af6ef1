from .base import (
    Alternative,
    Completion,
    FinishReason,
    Provider,
    ProviderConfig,
    ProviderKind,
    TokenEvent,
)
from .http import HttpProvider
from .scenario import ScenarioBuilder, ScenarioProvider

__all__ = [
    "Alternative",
    "Completion",
    "FinishReason",
    "HttpProvider",
    "Provider",
    "ProviderConfig",
    "ProviderKind",
    "ScenarioBuilder",
    "ScenarioProvider",
    "TokenEvent",
]
