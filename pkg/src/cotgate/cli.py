"""Command line front end.

Subcommands: `generate` decodes one prompt, `bench` scores a problem set,
`sweep` repeats the benchmark across thresholds, `inspect` pretty-prints
a trace and can replay its gating decisions. Exit codes: 0 success,
1 usage or configuration problem, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import json
import shlex
import sys
from importlib import resources
from pathlib import Path

from . import bench as bench_mod
from .cot import CotConfig, default_examples, load_examples
from .engine import (
    DEFAULT_STOP,
    EngineConfig,
    EngineMode,
    generate,
)
from .errors import (
    CotgateError,
    DatasetError,
    GenerationError,
    InvalidConfigurationError,
)
from .execution import (
    DEFAULT_RUNNER_CMD,
    InProcessExecutor,
    RunnerProcessExecutor,
)
from .providers.base import ProviderConfig, ProviderKind
from .providers.http import HttpProvider
from .providers.scenario import ScenarioProvider
from .trace import load_trace, render_table, replay_gating, write_trace
from .uncertainty import Measure, TruncationMode

USAGE_ERROR = 1
RUNTIME_ERROR = 2


def _add_provider_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("provider")
    group.add_argument("--provider", choices=["scenario", "http"], default=None)
    group.add_argument(
        "--scenario",
        help="scenario file path, or the name of a bundled scenario",
    )
    group.add_argument("--endpoint", help="completions endpoint URL")
    group.add_argument("--model", help="model name sent to the endpoint")
    group.add_argument("--top-k-logprobs", type=int, default=None)
    group.add_argument("--vocab-size", type=int, default=None)


def _add_engine_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("decoding")
    group.add_argument(
        "--mode", choices=[m.value for m in EngineMode], default=None
    )
    group.add_argument(
        "--measure", choices=[m.value for m in Measure], default=None
    )
    group.add_argument("--tau", type=float, default=None)
    group.add_argument(
        "--truncation",
        choices=[t.value for t in TruncationMode],
        default=None,
        help="how to treat unreported vocabulary mass in entropy",
    )
    group.add_argument("--k-samples", type=int, default=None)
    group.add_argument(
        "--shots",
        type=int,
        default=None,
        help="how many worked examples to prepend when deliberating",
    )
    group.add_argument("--temperature", type=float, default=None)
    group.add_argument("--cot-max-tokens", type=int, default=None)
    group.add_argument("--fewshot", help="JSON file of worked examples")
    group.add_argument("--stop", action="append", default=None)
    group.add_argument("--no-dedent-stop", action="store_true")
    group.add_argument("--max-lines", type=int, default=None)
    group.add_argument("--max-tokens-per-line", type=int, default=None)
    group.add_argument("--seed", type=int, default=None)


def _add_executor_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("execution")
    group.add_argument(
        "--executor", choices=["inprocess", "runner"], default=None
    )
    group.add_argument(
        "--runner-cmd",
        help="command line that starts a runner process",
    )
    group.add_argument("--parallelism", type=int, default=None)
    group.add_argument(
        "--timeout-s",
        type=float,
        default=None,
        help="override every problem's execution time budget",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cotgate",
        description="Uncertainty-gated line-by-line code decoding",
    )
    parser.add_argument(
        "--config", help="JSON file of defaults; explicit flags override it"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="decode one prompt")
    _add_provider_args(p_gen)
    _add_engine_args(p_gen)
    p_gen.add_argument("--prompt", help="prompt text")
    p_gen.add_argument("--prompt-file", help="file holding the prompt")
    p_gen.add_argument(
        "--prompt-label",
        help="named prompt from the scenario file's prompts table",
    )
    p_gen.add_argument("--trace", help="write a JSONL trace here")
    p_gen.add_argument(
        "--strip-reasoning",
        action="store_true",
        help="remove injected reasoning comment lines from the output",
    )

    p_bench = sub.add_parser("bench", help="score a JSONL problem set")
    _add_provider_args(p_bench)
    _add_engine_args(p_bench)
    _add_executor_args(p_bench)
    p_bench.add_argument(
        "--dataset", required=True,
        help="problems JSONL path, or the name of a bundled dataset",
    )
    p_bench.add_argument("--out", help="directory for summary and traces")

    p_sweep = sub.add_parser("sweep", help="benchmark across thresholds")
    _add_provider_args(p_sweep)
    _add_engine_args(p_sweep)
    _add_executor_args(p_sweep)
    p_sweep.add_argument("--dataset", required=True)
    p_sweep.add_argument(
        "--taus", required=True, help="comma-separated thresholds"
    )
    p_sweep.add_argument("--out", help="directory for per-threshold artifacts")

    p_inspect = sub.add_parser("inspect", help="render a trace file")
    p_inspect.add_argument("trace", help="trace JSONL path")
    p_inspect.add_argument(
        "--replay",
        action="store_true",
        help="recompute gating from stored distributions and verify",
    )
    return parser


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise InvalidConfigurationError("config file must hold a JSON object")
    return doc


def _setting(ns: argparse.Namespace, file_cfg: dict, name: str, default):
    value = getattr(ns, name, None)
    if value is not None:
        return value
    if name in file_cfg:
        return file_cfg[name]
    return default


def _build_provider(ns: argparse.Namespace, file_cfg: dict):
    kind = _setting(ns, file_cfg, "provider", None)
    scenario = _setting(ns, file_cfg, "scenario", None)
    if kind is None:
        kind = "scenario" if scenario else None
    if kind is None:
        raise InvalidConfigurationError(
            "choose a provider: --scenario FILE or --provider http"
        )
    if kind == "scenario":
        if not scenario:
            raise InvalidConfigurationError("--scenario is required")
        return ScenarioProvider(_resolve_scenario(scenario))
    endpoint = _setting(ns, file_cfg, "endpoint", None)
    model = _setting(ns, file_cfg, "model", None)
    if not endpoint or not model:
        raise InvalidConfigurationError(
            "http provider needs --endpoint and --model"
        )
    config = ProviderConfig(
        kind=ProviderKind.HTTP,
        endpoint=endpoint,
        model_name=model,
        top_k_logprobs=_setting(ns, file_cfg, "top_k_logprobs", 5),
        vocab_size=_setting(ns, file_cfg, "vocab_size", 32000),
    )
    return HttpProvider(config)


def _resolve_scenario(name_or_path: str) -> dict | str:
    if Path(name_or_path).is_file():
        return name_or_path
    packaged = resources.files("cotgate").joinpath(
        f"data/scenarios/{name_or_path}.json"
    )
    if packaged.is_file():
        return json.loads(packaged.read_text(encoding="utf-8"))
    raise InvalidConfigurationError(
        f"scenario {name_or_path!r} is neither a file nor a bundled name"
    )


def _resolve_dataset(name_or_path: str, stack: contextlib.ExitStack) -> Path:
    if Path(name_or_path).is_file():
        return Path(name_or_path)
    packaged = resources.files("cotgate").joinpath(
        f"data/datasets/{name_or_path}.jsonl"
    )
    if packaged.is_file():
        return stack.enter_context(resources.as_file(packaged))
    raise InvalidConfigurationError(
        f"dataset {name_or_path!r} is neither a file nor a bundled name"
    )


def _build_engine_config(ns: argparse.Namespace, file_cfg: dict) -> EngineConfig:
    fewshot = _setting(ns, file_cfg, "fewshot", None)
    examples = load_examples(fewshot) if fewshot else default_examples()
    shots = _setting(ns, file_cfg, "shots", None)
    if shots is not None:
        if shots < 0:
            raise InvalidConfigurationError("--shots must be >= 0")
        if shots > len(examples):
            raise InvalidConfigurationError(
                f"asked for {shots} worked examples but the set holds "
                f"{len(examples)}"
            )
        examples = tuple(examples)[:shots]
    cot = CotConfig(
        k_samples=_setting(ns, file_cfg, "k_samples", 5),
        temperature=_setting(ns, file_cfg, "temperature", 0.4),
        max_tokens=_setting(ns, file_cfg, "cot_max_tokens", 192),
        examples=examples,
    )
    stop = _setting(ns, file_cfg, "stop", None)
    dedent = not getattr(ns, "no_dedent_stop", False)
    if "dedent_stop" in file_cfg and not getattr(ns, "no_dedent_stop", False):
        dedent = bool(file_cfg["dedent_stop"])
    return EngineConfig(
        mode=EngineMode(_setting(ns, file_cfg, "mode", EngineMode.GATED.value)),
        measure=Measure(_setting(ns, file_cfg, "measure", Measure.ENTROPY.value)),
        tau=_setting(ns, file_cfg, "tau", None),
        truncation_mode=TruncationMode(
            _setting(
                ns, file_cfg, "truncation", TruncationMode.RESIDUAL_UNIFORM.value
            )
        ),
        cot=cot,
        stop=tuple(stop) if stop else DEFAULT_STOP,
        dedent_stop=dedent,
        max_lines=_setting(ns, file_cfg, "max_lines", 64),
        max_tokens_per_line=_setting(ns, file_cfg, "max_tokens_per_line", 64),
        seed=_setting(ns, file_cfg, "seed", 0),
    )


def _apply_timeout_override(
    problems: tuple, ns: argparse.Namespace, file_cfg: dict
) -> tuple:
    timeout_s = _setting(ns, file_cfg, "timeout_s", None)
    if timeout_s is None:
        return problems
    if timeout_s <= 0:
        raise InvalidConfigurationError("--timeout-s must be positive")
    return tuple(
        dataclasses.replace(p, timeout_s=float(timeout_s)) for p in problems
    )


def _build_executor_factory(ns: argparse.Namespace, file_cfg: dict):
    choice = _setting(ns, file_cfg, "executor", "inprocess")
    if choice == "inprocess":
        return InProcessExecutor
    runner_cmd = _setting(ns, file_cfg, "runner_cmd", None)
    cmd = tuple(shlex.split(runner_cmd)) if runner_cmd else DEFAULT_RUNNER_CMD
    return lambda: RunnerProcessExecutor(cmd)


def _read_prompt(ns: argparse.Namespace, provider) -> str:
    sources = [
        bool(ns.prompt),
        bool(ns.prompt_file),
        bool(ns.prompt_label),
    ]
    if sum(sources) != 1:
        raise InvalidConfigurationError(
            "give exactly one of --prompt, --prompt-file, --prompt-label"
        )
    if ns.prompt:
        return ns.prompt
    if ns.prompt_file:
        return Path(ns.prompt_file).read_text(encoding="utf-8")
    prompts = getattr(provider, "prompts", {})
    if ns.prompt_label not in prompts:
        raise InvalidConfigurationError(
            f"scenario has no prompt labelled {ns.prompt_label!r}"
        )
    return prompts[ns.prompt_label]


def _cmd_generate(ns: argparse.Namespace, file_cfg: dict) -> int:
    provider = _build_provider(ns, file_cfg)
    config = _build_engine_config(ns, file_cfg)
    prompt = _read_prompt(ns, provider)
    result = generate(provider, prompt, config)
    if ns.trace:
        write_trace(ns.trace, result, config, provider.identity)
    text = result.stripped_completion() if ns.strip_reasoning else result.completion_text
    sys.stdout.write(text)
    if text and not text.endswith("\n"):
        sys.stdout.write("\n")
    print(f"[finish: {result.finish.value}]", file=sys.stderr)
    return 0


def _parse_taus(raw: str) -> list[float]:
    try:
        taus = [float(part) for part in raw.split(",") if part.strip()]
    except ValueError as exc:
        raise InvalidConfigurationError(f"bad --taus value: {exc}") from exc
    if not taus:
        raise InvalidConfigurationError("--taus lists no thresholds")
    return taus


def _cmd_bench(ns: argparse.Namespace, file_cfg: dict) -> int:
    provider = _build_provider(ns, file_cfg)
    config = _build_engine_config(ns, file_cfg)
    factory = _build_executor_factory(ns, file_cfg)
    parallelism = _setting(ns, file_cfg, "parallelism", 1)
    with contextlib.ExitStack() as stack:
        dataset = _resolve_dataset(ns.dataset, stack)
        problems = _apply_timeout_override(
            bench_mod.load_problems(dataset), ns, file_cfg
        )
        trace_dir = Path(ns.out) / "traces" if ns.out else None
        summary = bench_mod.run_benchmark(
            provider, problems, config, factory, parallelism, trace_dir
        )
    if ns.out:
        bench_mod.write_summary(ns.out, summary, config, provider.identity)
    rate = summary.rate
    print(
        f"pass_rate {summary.passed}/{summary.total} "
        f"({bench_mod.truncated_decimal(rate, 3)})"
    )
    return 0


def _cmd_sweep(ns: argparse.Namespace, file_cfg: dict) -> int:
    provider = _build_provider(ns, file_cfg)
    config = _build_engine_config(ns, file_cfg)
    factory = _build_executor_factory(ns, file_cfg)
    parallelism = _setting(ns, file_cfg, "parallelism", 1)
    taus = _parse_taus(ns.taus)
    with contextlib.ExitStack() as stack:
        dataset = _resolve_dataset(ns.dataset, stack)
        problems = _apply_timeout_override(
            bench_mod.load_problems(dataset), ns, file_cfg
        )
        results = bench_mod.run_sweep(
            provider, problems, config, taus, factory, parallelism, ns.out
        )
    for tau, summary in results:
        print(
            f"tau={tau!r} pass_rate {summary.passed}/{summary.total} "
            f"({bench_mod.truncated_decimal(summary.rate, 3)})"
        )
    return 0


def _cmd_inspect(ns: argparse.Namespace, file_cfg: dict) -> int:
    trace = load_trace(ns.trace)
    print(render_table(trace))
    if ns.replay:
        rows = replay_gating(trace)
        mismatches = [row for row in rows if not row.match]
        print()
        if mismatches:
            for row in mismatches:
                print(
                    f"line {row.index}: recorded "
                    f"value={row.recorded_value!r} gated={row.recorded_gated} "
                    f"but replay got value={row.replayed_value!r} "
                    f"gated={row.replayed_gated}"
                )
            return RUNTIME_ERROR
        print(f"replay: {len(rows)} measured lines, all gate decisions reproduced")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "bench": _cmd_bench,
    "sweep": _cmd_sweep,
    "inspect": _cmd_inspect,
}


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else USAGE_ERROR
    try:
        file_cfg = _load_config_file(ns.config)
        return _COMMANDS[ns.command](ns, file_cfg)
    except (InvalidConfigurationError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except GenerationError as exc:
        print(f"generation failed: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    except CotgateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))
