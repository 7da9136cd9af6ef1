import json
import sys
import textwrap

import pytest

from cotgate.errors import RunnerUnavailableError
from cotgate.execution import (
    ExecRequest,
    ExecStatus,
    InProcessExecutor,
    RunnerProcessExecutor,
    assemble_program,
)

ADD_SOLUTION = "def add2(x):\n    return x + 2\n"
ADD_TESTS = textwrap.dedent(
    """\
    def check(candidate):
        assert candidate(1) == 3
        assert candidate(-2) == 0
    """
)


class TestAssembleProgram:
    def test_sections_and_final_call(self):
        program = assemble_program(ADD_SOLUTION, ADD_TESTS, "add2")
        assert program.endswith("check(add2)\n")
        assert "\n\ndef check(candidate):" in program
        assert program.count("\n\n") == 2

    def test_trailing_newlines_collapsed(self):
        a = assemble_program(ADD_SOLUTION + "\n\n", ADD_TESTS + "\n", "add2")
        b = assemble_program(ADD_SOLUTION, ADD_TESTS, "add2")
        assert a == b


class TestInProcessExecutor:
    def test_pass(self):
        resp = InProcessExecutor().run(ExecRequest(ADD_SOLUTION, ADD_TESTS, "add2"))
        assert resp.status is ExecStatus.PASS
        assert resp.detail == ""
        assert resp.wall_time_s >= 0.0

    def test_assertion_is_fail(self):
        wrong = "def add2(x):\n    return x + 3\n"
        resp = InProcessExecutor().run(ExecRequest(wrong, ADD_TESTS, "add2"))
        assert resp.status is ExecStatus.FAIL
        assert resp.detail.startswith("AssertionError")

    def test_exception_is_error(self):
        broken = "def add2(x):\n    return x / 0\n"
        resp = InProcessExecutor().run(ExecRequest(broken, ADD_TESTS, "add2"))
        assert resp.status is ExecStatus.ERROR
        assert "ZeroDivisionError" in resp.detail

    def test_syntax_error_is_error(self):
        resp = InProcessExecutor().run(ExecRequest("def add2(:\n", ADD_TESTS, "add2"))
        assert resp.status is ExecStatus.ERROR
        assert "SyntaxError" in resp.detail

    def test_missing_entry_point_is_error(self):
        resp = InProcessExecutor().run(
            ExecRequest(ADD_SOLUTION, ADD_TESTS, "no_such_name")
        )
        assert resp.status is ExecStatus.ERROR
        assert "NameError" in resp.detail

    def test_solution_stdout_is_swallowed(self, capsys):
        noisy = "def add2(x):\n    print('noise')\n    return x + 2\n"
        resp = InProcessExecutor().run(ExecRequest(noisy, ADD_TESTS, "add2"))
        assert resp.status is ExecStatus.PASS
        assert capsys.readouterr().out == ""

    def test_detail_is_deterministic(self):
        wrong = "def add2(x):\n    return x\n"
        request = ExecRequest(wrong, ADD_TESTS, "add2")
        first = InProcessExecutor().run(request)
        second = InProcessExecutor().run(request)
        assert first.status == second.status
        assert first.detail == second.detail


def _fake_runner(body: str) -> tuple[str, ...]:
    return (sys.executable, "-c", body)


class TestRunnerProcessExecutor:
    def test_rejects_wrong_protocol(self):
        cmd = _fake_runner('print(\'{"runner_protocol": 99}\', flush=True)')
        with pytest.raises(RunnerUnavailableError, match="protocol"):
            RunnerProcessExecutor(cmd)

    def test_rejects_non_json_handshake(self):
        cmd = _fake_runner("print('hello', flush=True)")
        with pytest.raises(RunnerUnavailableError, match="not JSON"):
            RunnerProcessExecutor(cmd)

    def test_rejects_immediate_exit(self):
        cmd = _fake_runner("pass")
        with pytest.raises(RunnerUnavailableError, match="handshake"):
            RunnerProcessExecutor(cmd)

    def test_round_trip_with_echo_runner(self):
        body = textwrap.dedent(
            """\
            import json, sys
            print(json.dumps({"runner_protocol": 1}), flush=True)
            for line in sys.stdin:
                req = json.loads(line)
                resp = {
                    "status": "fail",
                    "detail": "entry=" + req["entry_point"],
                    "wall_time_s": 0.25,
                }
                print(json.dumps(resp), flush=True)
            """
        )
        with RunnerProcessExecutor(_fake_runner(body)) as executor:
            resp = executor.run(ExecRequest(ADD_SOLUTION, ADD_TESTS, "add2"))
        assert resp.status is ExecStatus.FAIL
        assert resp.detail == "entry=add2"
        assert resp.wall_time_s == 0.25

    def test_request_payload_fields(self):
        body = textwrap.dedent(
            """\
            import json, sys
            print(json.dumps({"runner_protocol": 1}), flush=True)
            line = sys.stdin.readline()
            req = json.loads(line)
            keys = sorted(req)
            print(json.dumps({"status": "error", "detail": ",".join(keys)}),
                  flush=True)
            """
        )
        with RunnerProcessExecutor(_fake_runner(body)) as executor:
            resp = executor.run(
                ExecRequest(ADD_SOLUTION, ADD_TESTS, "add2", timeout_s=3.0)
            )
        assert resp.detail == "entry_point,solution_code,test_code,timeout_s"

    def test_mid_request_exit_raises(self):
        body = textwrap.dedent(
            """\
            import json, sys
            print(json.dumps({"runner_protocol": 1}), flush=True)
            sys.stdin.readline()
            """
        )
        executor = RunnerProcessExecutor(_fake_runner(body))
        try:
            with pytest.raises(RunnerUnavailableError, match="mid-request"):
                executor.run(ExecRequest(ADD_SOLUTION, ADD_TESTS, "add2"))
        finally:
            executor.close()

    def test_malformed_response_raises(self):
        body = textwrap.dedent(
            """\
            import json, sys
            print(json.dumps({"runner_protocol": 1}), flush=True)
            sys.stdin.readline()
            print("not json", flush=True)
            """
        )
        executor = RunnerProcessExecutor(_fake_runner(body))
        try:
            with pytest.raises(RunnerUnavailableError, match="malformed"):
                executor.run(ExecRequest(ADD_SOLUTION, ADD_TESTS, "add2"))
        finally:
            executor.close()

    def test_close_is_idempotent(self):
        body = textwrap.dedent(
            """\
            import json, sys
            print(json.dumps({"runner_protocol": 1}), flush=True)
            for line in sys.stdin:
                pass
            """
        )
        executor = RunnerProcessExecutor(_fake_runner(body))
        executor.close()
        executor.close()
