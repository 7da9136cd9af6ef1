"""Pass-rate benchmark over a JSONL problem set.

Each problem is decoded once, the solution (prompt plus completion) runs
against the problem's test code, and the harness reports passed/total as
an exact fraction. Artifacts avoid wall times and timestamps so reruns
are byte-identical regardless of parallelism.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

from .engine import EngineConfig, GenerationResult, generate
from .errors import (
    DatasetError,
    DuplicateTaskIdError,
    EmptyDatasetError,
    GenerationError,
    InvalidConfigurationError,
)
from .execution import ExecRequest, Executor
from .providers.base import Provider
from .trace import config_snapshot, serialize_trace

SUMMARY_FORMAT = 1


@dataclass(frozen=True)
class Problem:
    task_id: str
    prompt: str
    test_code: str
    entry_point: str
    timeout_s: float = 10.0


class EvalStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    TIMEOUT = "timeout"
    ERROR = "error"
    GEN_ERROR = "gen_error"


@dataclass(frozen=True)
class EvalOutcome:
    task_id: str
    status: EvalStatus
    detail: str = ""
    finish: str = ""


@dataclass(frozen=True)
class BenchSummary:
    outcomes: tuple[EvalOutcome, ...]

    @property
    def total(self) -> int:
        return len(self.outcomes)

    @property
    def passed(self) -> int:
        return sum(1 for o in self.outcomes if o.status is EvalStatus.PASS)

    @property
    def rate(self) -> Fraction:
        return pass_rate(self.outcomes)


def pass_rate(outcomes: Sequence[EvalOutcome]) -> Fraction:
    """Exact passed/total; generation failures count in the denominator."""
    if not outcomes:
        raise EmptyDatasetError("pass rate over zero problems is undefined")
    passed = sum(1 for o in outcomes if o.status is EvalStatus.PASS)
    return Fraction(passed, len(outcomes))


def truncated_decimal(rate: Fraction, places: int) -> str:
    """Decimal string truncated (not rounded) to `places` digits."""
    if places < 1:
        raise InvalidConfigurationError("places must be >= 1")
    whole, rem = divmod(rate.numerator, rate.denominator)
    digits = (rem * 10**places) // rate.denominator
    return f"{whole}.{digits:0{places}d}"


def load_problems(path: str | Path) -> tuple[Problem, ...]:
    problems = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                doc = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            try:
                problem = Problem(
                    task_id=doc["task_id"],
                    prompt=doc["prompt"],
                    test_code=doc["test_code"],
                    entry_point=doc["entry_point"],
                    timeout_s=float(doc.get("timeout_s", 10.0)),
                )
            except KeyError as exc:
                raise DatasetError(f"{path}:{lineno}: missing field {exc}") from exc
            if not problem.task_id or not problem.prompt or not problem.entry_point:
                raise DatasetError(f"{path}:{lineno}: empty required field")
            if problem.task_id in seen:
                raise DuplicateTaskIdError(
                    f"{path}:{lineno}: duplicate task_id {problem.task_id!r}"
                )
            seen.add(problem.task_id)
            problems.append(problem)
    if not problems:
        raise EmptyDatasetError(f"{path} holds no problems")
    return tuple(problems)


def _sanitize(task_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", task_id)


def _evaluate(
    provider: Provider,
    problem: Problem,
    config: EngineConfig,
    executor: Executor,
) -> tuple[EvalOutcome, GenerationResult | None]:
    try:
        result = generate(provider, problem.prompt, config)
    except GenerationError as exc:
        outcome = EvalOutcome(
            problem.task_id,
            EvalStatus.GEN_ERROR,
            detail=str(exc),
            finish=exc.partial_result.finish.value if exc.partial_result else "",
        )
        return outcome, exc.partial_result
    solution = problem.prompt + result.completion_text
    response = executor.run(
        ExecRequest(solution, problem.test_code, problem.entry_point, problem.timeout_s)
    )
    outcome = EvalOutcome(
        problem.task_id,
        EvalStatus(response.status.value),
        detail=response.detail,
        finish=result.finish.value,
    )
    return outcome, result


def run_benchmark(
    provider: Provider,
    problems: Sequence[Problem],
    config: EngineConfig,
    executor_factory: Callable[[], Executor],
    parallelism: int = 1,
    trace_dir: str | Path | None = None,
) -> BenchSummary:
    """Evaluate every problem; outcomes keep input order whatever the
    parallelism, and each worker thread gets its own executor."""
    if parallelism < 1:
        raise InvalidConfigurationError("parallelism must be >= 1")
    if not problems:
        raise EmptyDatasetError("no problems to run")

    local = threading.local()
    created: list[Executor] = []
    created_lock = threading.Lock()

    def work(problem: Problem) -> tuple[EvalOutcome, GenerationResult | None]:
        executor = getattr(local, "executor", None)
        if executor is None:
            executor = executor_factory()
            local.executor = executor
            with created_lock:
                created.append(executor)
        return _evaluate(provider, problem, config, executor)

    try:
        if parallelism == 1:
            evaluated = [work(p) for p in problems]
        else:
            with ThreadPoolExecutor(max_workers=parallelism) as pool:
                evaluated = list(pool.map(work, problems))
    finally:
        for executor in created:
            executor.close()

    if trace_dir is not None:
        trace_root = Path(trace_dir)
        trace_root.mkdir(parents=True, exist_ok=True)
        for problem, (_, result) in zip(problems, evaluated):
            if result is None:
                continue
            lines = serialize_trace(result, config, provider.identity)
            path = trace_root / f"{_sanitize(problem.task_id)}.jsonl"
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    return BenchSummary(tuple(outcome for outcome, _ in evaluated))


def summary_document(
    summary: BenchSummary, config: EngineConfig, provider_identity: str
) -> dict:
    rate = summary.rate
    return {
        "format_version": SUMMARY_FORMAT,
        "provider": provider_identity,
        "config": config_snapshot(config),
        "passed": summary.passed,
        "total": summary.total,
        "pass_rate": {
            "numerator": rate.numerator,
            "denominator": rate.denominator,
            "approx": rate.numerator / rate.denominator,
        },
        "outcomes": [
            {
                "task_id": o.task_id,
                "status": o.status.value,
                "detail": o.detail,
                "finish": o.finish,
            }
            for o in summary.outcomes
        ],
    }


def write_summary(
    out_dir: str | Path,
    summary: BenchSummary,
    config: EngineConfig,
    provider_identity: str,
) -> None:
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    doc = summary_document(summary, config, provider_identity)
    with open(root / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, ensure_ascii=False)
        fh.write("\n")
    with open(root / "outcomes.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["task_id", "status", "finish", "detail"])
        for o in summary.outcomes:
            writer.writerow([o.task_id, o.status.value, o.finish, o.detail])


def run_sweep(
    provider: Provider,
    problems: Sequence[Problem],
    base_config: EngineConfig,
    taus: Sequence[float],
    executor_factory: Callable[[], Executor],
    parallelism: int = 1,
    out_dir: str | Path | None = None,
) -> list[tuple[float, BenchSummary]]:
    """Rerun the benchmark at each threshold; everything else held fixed."""
    if not taus:
        raise InvalidConfigurationError("sweep needs at least one tau")
    results = []
    for tau in taus:
        config = dataclasses.replace(base_config, tau=tau)
        trace_dir = None
        if out_dir is not None:
            trace_dir = Path(out_dir) / f"tau_{tau!r}" / "traces"
        summary = run_benchmark(
            provider, problems, config, executor_factory, parallelism, trace_dir
        )
        if out_dir is not None:
            write_summary(
                Path(out_dir) / f"tau_{tau!r}", summary, config, provider.identity
            )
        results.append((tau, summary))
    if out_dir is not None:
        with open(
            Path(out_dir) / "sweep.csv", "w", encoding="utf-8", newline=""
        ) as fh:
            writer = csv.writer(fh)
            writer.writerow(["tau", "passed", "total", "pass_rate"])
            for tau, summary in results:
                rate = summary.rate
                writer.writerow(
                    [repr(tau), summary.passed, summary.total,
                     repr(rate.numerator / rate.denominator)]
                )
    return results
