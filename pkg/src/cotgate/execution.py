"""Backends that run a candidate solution against its test code.

The benchmark talks to executors through one small interface so the
sandboxed runner process can be swapped for the trusted in-process stub
in tests. The wire-level runner protocol: the runner prints a handshake
line `{"runner_protocol": 1}` on startup, then answers one JSON request
line with one JSON response line, forever.
"""

from __future__ import annotations

import contextlib
import io
import json
import subprocess
import sys
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Protocol

from .errors import RunnerUnavailableError

RUNNER_PROTOCOL = 1
DEFAULT_RUNNER_CMD = (sys.executable, "-m", "exec_runner")


class ExecStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    TIMEOUT = "timeout"
    ERROR = "error"


@dataclass(frozen=True)
class ExecRequest:
    solution_code: str
    test_code: str
    entry_point: str
    timeout_s: float = 10.0


@dataclass(frozen=True)
class ExecResponse:
    status: ExecStatus
    detail: str = ""
    wall_time_s: float = 0.0


class Executor(Protocol):
    def run(self, request: ExecRequest) -> ExecResponse: ...

    def close(self) -> None: ...


def assemble_program(solution_code: str, test_code: str, entry_point: str) -> str:
    """Join solution, test definitions, and the final check call into one
    script. Test code is expected to define `check(candidate)`."""
    return (
        solution_code.rstrip("\n")
        + "\n\n"
        + test_code.rstrip("\n")
        + "\n\n"
        + f"check({entry_point})\n"
    )


class InProcessExecutor:
    """Runs solutions with exec() in this interpreter. No isolation and no
    timeout enforcement: only for trusted fixture code and unit tests."""

    def run(self, request: ExecRequest) -> ExecResponse:
        program = assemble_program(
            request.solution_code, request.test_code, request.entry_point
        )
        namespace = {"__name__": "__solution__"}
        sink = io.StringIO()
        start = time.perf_counter()
        try:
            with contextlib.redirect_stdout(sink), contextlib.redirect_stderr(sink):
                exec(compile(program, "<solution>", "exec"), namespace)
        except AssertionError as exc:
            status, detail = ExecStatus.FAIL, _describe(exc)
        except BaseException as exc:
            status, detail = ExecStatus.ERROR, _describe(exc)
        else:
            status, detail = ExecStatus.PASS, ""
        return ExecResponse(status, detail, time.perf_counter() - start)

    def close(self) -> None:
        pass


def _describe(exc: BaseException) -> str:
    message = str(exc)
    name = type(exc).__name__
    return f"{name}: {message}" if message else name


class RunnerProcessExecutor:
    """Client for a runner subprocess speaking the line-JSON protocol."""

    def __init__(
        self,
        cmd: tuple[str, ...] = DEFAULT_RUNNER_CMD,
        startup_timeout_s: float = 15.0,
    ):
        self._cmd = cmd
        try:
            self._proc = subprocess.Popen(
                list(cmd),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise RunnerUnavailableError(f"cannot start runner {cmd}: {exc}") from exc
        handshake = self._readline_with_deadline(startup_timeout_s)
        try:
            fields = json.loads(handshake)
        except json.JSONDecodeError as exc:
            self.close()
            raise RunnerUnavailableError(
                f"runner handshake is not JSON: {handshake!r}"
            ) from exc
        if fields.get("runner_protocol") != RUNNER_PROTOCOL:
            self.close()
            raise RunnerUnavailableError(
                f"runner speaks protocol {fields.get('runner_protocol')!r}, "
                f"need {RUNNER_PROTOCOL}"
            )

    def _readline_with_deadline(self, timeout_s: float) -> str:
        # readline() has no timeout of its own; a timer killing the child
        # unblocks it if the command is not a runner at all.
        timer = threading.Timer(timeout_s, self._proc.kill)
        timer.start()
        try:
            line = self._proc.stdout.readline()
        finally:
            timer.cancel()
        if not line:
            raise RunnerUnavailableError(
                f"runner {self._cmd} exited before completing the handshake"
            )
        return line

    def run(self, request: ExecRequest) -> ExecResponse:
        if self._proc.poll() is not None:
            raise RunnerUnavailableError("runner process has exited")
        payload = {
            "solution_code": request.solution_code,
            "test_code": request.test_code,
            "entry_point": request.entry_point,
            "timeout_s": request.timeout_s,
        }
        try:
            self._proc.stdin.write(json.dumps(payload) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise RunnerUnavailableError("runner stdin closed") from exc
        line = self._proc.stdout.readline()
        if not line:
            raise RunnerUnavailableError("runner exited mid-request")
        try:
            fields = json.loads(line)
            return ExecResponse(
                status=ExecStatus(fields["status"]),
                detail=fields.get("detail", ""),
                wall_time_s=float(fields.get("wall_time_s", 0.0)),
            )
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise RunnerUnavailableError(
                f"malformed runner response: {line!r}"
            ) from exc

    def close(self) -> None:
        if self._proc.poll() is None:
            with contextlib.suppress(OSError):
                self._proc.stdin.close()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "RunnerProcessExecutor":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
