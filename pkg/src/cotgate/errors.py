"""Exception hierarchy shared across the package."""


class CotgateError(Exception):
    """Base class for all package errors."""


class InvalidDistributionError(CotgateError):
    """A token distribution violates its structural constraints."""


class InvalidConfigurationError(CotgateError):
    """A config value is outside its legal range."""


class ScenarioMissError(CotgateError):
    """The scripted scenario has no node for the requested context or seed."""


class ProviderUnavailableError(CotgateError):
    """The backend could not be reached after exhausting retries."""


class CapabilityMissingError(CotgateError):
    """The backend cannot supply data the engine requires (e.g. top-2 logprobs)."""


class DegenerateCandidateError(CotgateError):
    """A sampled candidate contains no code line."""


class AllDegenerateError(CotgateError):
    """Every sampled candidate in a reasoning step was degenerate.

    Carries the parsed candidates so callers falling back to greedy
    decoding can still record what was sampled.
    """

    def __init__(self, message: str, candidates=()):
        super().__init__(message)
        self.candidates = tuple(candidates)


class GenerationError(CotgateError):
    """Generation aborted; carries whatever trace was accumulated."""

    def __init__(self, message: str, partial_result=None):
        super().__init__(message)
        self.partial_result = partial_result


class DatasetError(CotgateError):
    """Problem file could not be parsed."""


class DuplicateTaskIdError(DatasetError):
    """Two problems share a task_id."""


class EmptyDatasetError(DatasetError):
    """An operation that needs at least one problem received none."""


class RunnerUnavailableError(CotgateError):
    """The execution runner process could not be started or handshaken."""
