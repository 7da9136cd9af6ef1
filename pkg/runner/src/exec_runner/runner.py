"""Evaluate candidate solutions against their tests, one child per request.

The process reads one JSON request per stdin line and answers each with
exactly one JSON response line on stdout, in order, after announcing
`{"runner_protocol": 1}` at startup. A request carries `solution_code`,
`test_code`, `entry_point`, and `timeout_s`; the response carries
`status` (pass | fail | timeout | error), `detail`, and `wall_time_s`.

Every request runs in a fresh child interpreter, so state cannot leak
between evaluations and a runaway solution only costs its own child:
the child's whole process group is killed when the time budget runs
out. Isolation is subprocess plus timeout, not a security boundary;
run untrusted solutions at your own risk.
"""

from __future__ import annotations

import json
import math
import os
import signal
import subprocess
import sys
import time
from dataclasses import dataclass
from typing import TextIO

PROTOCOL_VERSION = 1

_STATUSES = ("pass", "fail", "timeout", "error")
_STRING_FIELDS = ("solution_code", "test_code", "entry_point")


class BadRequest(ValueError):
    """The request line does not satisfy the protocol schema."""


@dataclass(frozen=True)
class ExecRequest:
    solution_code: str
    test_code: str
    entry_point: str
    timeout_s: float


def parse_request(doc: object) -> ExecRequest:
    if not isinstance(doc, dict):
        raise BadRequest("request must be a JSON object")
    for field in _STRING_FIELDS:
        value = doc.get(field)
        if not isinstance(value, str) or not value:
            raise BadRequest(f"{field} must be a non-empty string")
    if not doc["entry_point"].isidentifier():
        raise BadRequest("entry_point must be a Python identifier")
    timeout_s = doc.get("timeout_s", 10.0)
    if isinstance(timeout_s, bool) or not isinstance(timeout_s, (int, float)):
        raise BadRequest("timeout_s must be a number")
    if not (timeout_s > 0 and math.isfinite(timeout_s)):
        raise BadRequest("timeout_s must be a positive finite number")
    return ExecRequest(
        solution_code=doc["solution_code"],
        test_code=doc["test_code"],
        entry_point=doc["entry_point"],
        timeout_s=float(timeout_s),
    )


# Source of the child interpreter, passed via `-c`. The child reads the
# request payload from its own stdin, runs solution + tests + check call
# with prints captured, writes one verdict line to its real stdout, and
# hard-exits so stray threads started by a solution cannot hold it open.
_CHILD_HARNESS = r"""
import builtins
import contextlib
import io
import json
import os
import sys
import traceback


def describe(exc):
    line = traceback.format_exception_only(type(exc), exc)[-1].strip()
    tb, lineno = exc.__traceback__, None
    while tb is not None:
        if tb.tb_frame.f_code.co_filename == "<solution>":
            lineno = tb.tb_lineno
        tb = tb.tb_next
    return f"{line} (solution line {lineno})" if lineno else line


payload = json.load(sys.stdin)
sys.stdin = open(os.devnull, "r")
program = (
    payload["solution_code"].rstrip("\n")
    + "\n\n"
    + payload["test_code"].rstrip("\n")
    + "\n\n"
    + "check(" + payload["entry_point"] + ")\n"
)
# input() would hang on a pipe that carries protocol data, never answers.
allowed = {k: v for k, v in vars(builtins).items() if k != "input"}
namespace = {"__name__": "__solution__", "__builtins__": allowed}
verdict_out = sys.stdout
sink = io.StringIO()
status, detail = "pass", ""
try:
    with contextlib.redirect_stdout(sink), contextlib.redirect_stderr(sink):
        exec(compile(program, "<solution>", "exec"), namespace)
except AssertionError as exc:
    status, detail = "fail", describe(exc)
except BaseException as exc:
    status, detail = "error", describe(exc)
print(json.dumps({"status": status, "detail": detail}),
      file=verdict_out, flush=True)
os._exit(0)
"""


def _kill_group(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        proc.kill()


def _tail(text: str, limit: int = 400) -> str:
    text = text.strip()
    return text[-limit:]


def _extract_verdict(out: str) -> dict | None:
    # The verdict is the last line the harness printed; scan backwards
    # past anything a solution managed to push onto the raw descriptor.
    for line in reversed(out.splitlines()):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError:
            continue
        if isinstance(doc, dict) and doc.get("status") in ("pass", "fail", "error"):
            return doc
    return None


def evaluate(request: ExecRequest) -> dict:
    """Run one request in a fresh child; always returns a response dict."""
    payload = json.dumps(
        {
            "solution_code": request.solution_code,
            "test_code": request.test_code,
            "entry_point": request.entry_point,
        }
    )
    started = time.perf_counter()
    child = subprocess.Popen(
        [sys.executable, "-I", "-c", _CHILD_HARNESS],
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
        encoding="utf-8",
        start_new_session=True,
    )
    try:
        out, err = child.communicate(payload, timeout=request.timeout_s)
    except subprocess.TimeoutExpired:
        _kill_group(child)
        child.communicate()
        return {
            "status": "timeout",
            "detail": f"killed after exceeding the {request.timeout_s}s budget",
            "wall_time_s": time.perf_counter() - started,
        }
    wall = time.perf_counter() - started
    if child.returncode != 0:
        stderr_tail = _tail(err)
        detail = f"child exited with code {child.returncode}"
        if stderr_tail:
            detail = f"{detail}: {stderr_tail}"
        return {"status": "error", "detail": detail, "wall_time_s": wall}
    verdict = _extract_verdict(out)
    if verdict is None:
        return {
            "status": "error",
            "detail": "child produced no verdict",
            "wall_time_s": wall,
        }
    return {
        "status": verdict["status"],
        "detail": verdict.get("detail", ""),
        "wall_time_s": wall,
    }


def _emit(stdout: TextIO, doc: dict) -> None:
    stdout.write(json.dumps(doc) + "\n")
    stdout.flush()


def serve(stdin: TextIO, stdout: TextIO) -> int:
    """Handshake, then answer every request line until stdin closes."""
    try:
        _emit(stdout, {"runner_protocol": PROTOCOL_VERSION})
        for raw in stdin:
            if not raw.strip():
                continue
            try:
                request = parse_request(json.loads(raw))
            except json.JSONDecodeError as exc:
                _emit(
                    stdout,
                    {
                        "status": "error",
                        "detail": f"bad request: invalid JSON: {exc}",
                        "wall_time_s": 0.0,
                    },
                )
                continue
            except BadRequest as exc:
                _emit(
                    stdout,
                    {
                        "status": "error",
                        "detail": f"bad request: {exc}",
                        "wall_time_s": 0.0,
                    },
                )
                continue
            _emit(stdout, evaluate(request))
    except BrokenPipeError:
        return 1
    return 0
