"""Uncertainty-gated line-by-line code decoding.

The engine measures how unsure a backend is at the start of every code
line; unsure lines are re-derived by sampling several reasoning-guided
candidates and keeping the most confident one, while easy lines stay on
the cheap greedy path. A benchmark harness scores the result as an exact
pass fraction over a problem set.
"""

from .bench import (
    BenchSummary,
    EvalOutcome,
    EvalStatus,
    Problem,
    load_problems,
    pass_rate,
    run_benchmark,
    run_sweep,
    truncated_decimal,
)
from .cot import (
    CotCandidate,
    CotConfig,
    CotStepResult,
    FewShotExample,
    build_cot_prompt,
    default_examples,
    run_cot_step,
)
from .engine import (
    DEFAULT_STOP,
    DEFAULT_TAU,
    EngineConfig,
    EngineFinish,
    EngineMode,
    GenerationResult,
    LineRecord,
    generate,
)
from .errors import (
    AllDegenerateError,
    CapabilityMissingError,
    CotgateError,
    DatasetError,
    DegenerateCandidateError,
    DuplicateTaskIdError,
    EmptyDatasetError,
    GenerationError,
    InvalidConfigurationError,
    InvalidDistributionError,
    ProviderUnavailableError,
    RunnerUnavailableError,
    ScenarioMissError,
)
from .execution import (
    ExecRequest,
    ExecResponse,
    ExecStatus,
    Executor,
    InProcessExecutor,
    RunnerProcessExecutor,
)
from .providers import (
    Alternative,
    Completion,
    FinishReason,
    HttpProvider,
    Provider,
    ProviderConfig,
    ProviderKind,
    ScenarioBuilder,
    ScenarioProvider,
    TokenEvent,
)
from .trace import (
    Trace,
    load_trace,
    replay_gating,
    serialize_trace,
    write_trace,
)
from .uncertainty import (
    DistributionEntry,
    Measure,
    TokenDistribution,
    TruncationMode,
    UncertaintyScore,
    entropy_uncertainty,
    gate,
    pd_uncertainty,
    shannon_entropy,
)

__version__ = "0.1.0"
