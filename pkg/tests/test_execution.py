import json

import pytest

from graphcrew.execution import (
    ExecutionOutcome,
    StubExecutor,
    classify_envelope,
    fail,
    ok,
    timed_out,
)


class TestOutcomeInvariants:
    def test_error_class_none_requires_clean_exit(self):
        with pytest.raises(ValueError):
            ExecutionOutcome("out", "", 1, 5, False, "none")
        with pytest.raises(ValueError):
            ExecutionOutcome("out", "", 0, 5, False, "runtime")

    def test_timeout_requires_nonzero_exit(self):
        outcome = timed_out()
        assert outcome.timed_out and outcome.exit_status != 0

    def test_unknown_error_class_rejected(self):
        with pytest.raises(ValueError):
            ExecutionOutcome("", "", 1, 5, False, "mystery")


class TestClassifyEnvelope:
    def test_clean_run(self):
        outcome = classify_envelope(
            {"stdout": "hello\n", "stderr": "", "exit_code": 0, "duration_ms": 12, "timed_out": False}
        )
        assert outcome.error_class == "none"
        assert outcome.stdout == "hello\n"

    def test_timeout(self):
        outcome = classify_envelope(
            {"stdout": "", "stderr": "", "exit_code": 124, "duration_ms": 1000, "timed_out": True}
        )
        assert outcome.error_class == "timeout"

    def test_syntax_error(self):
        outcome = classify_envelope(
            {"stdout": "", "stderr": "SyntaxError: invalid syntax", "exit_code": 1, "duration_ms": 5, "timed_out": False}
        )
        assert outcome.error_class == "syntax"

    def test_runtime_error(self):
        outcome = classify_envelope(
            {"stdout": "", "stderr": "ZeroDivisionError", "exit_code": 1, "duration_ms": 5, "timed_out": False}
        )
        assert outcome.error_class == "runtime"

    def test_launch_failure(self):
        outcome = classify_envelope(
            {"stdout": "", "stderr": "interpreter missing", "exit_code": 127, "duration_ms": 0, "timed_out": False}
        )
        assert outcome.error_class == "launch"


class TestStubExecutor:
    def test_mapping_mode(self):
        stub = StubExecutor(rules=[("print('a')", ok("a\n")), ("", fail("no rule"))])
        assert stub.run("print('a')").stdout == "a\n"
        assert stub.run("print('b')").error_class == "runtime"

    def test_sequence_mode_repeats_last(self):
        stub = StubExecutor.sequence([fail("first"), ok("second\n")])
        assert stub.run("x").error_class == "runtime"
        assert stub.run("x").stdout == "second\n"
        assert stub.run("x").stdout == "second\n"

    def test_records_calls_and_stage_files(self):
        stub = StubExecutor(default=ok("y\n"))
        stub.run("code body", stage_files=("/tmp/graph.txt",))
        assert stub.calls[0]["code"] == "code body"
        assert stub.calls[0]["stage_files"] == ("/tmp/graph.txt",)


RUNNER_FAKE = """#!/usr/bin/env python3
import json, sys, time
args = sys.argv[1:]
code_file = args[0]
mode = open(code_file).read().strip()
if mode == "hang":
    time.sleep(60)
envelope = {"stdout": "ran: " + mode, "stderr": "", "exit_code": 0, "duration_ms": 3, "timed_out": False}
print("runner log line", file=sys.stderr)
print(json.dumps(envelope))
"""


class TestSandboxExecutor:
    def test_envelope_parsed_from_runner(self, tmp_path):
        from graphcrew.execution import SandboxExecutor

        runner = tmp_path / "fake_runner.py"
        runner.write_text(RUNNER_FAKE)
        executor = SandboxExecutor(runner_cmd=["python3", str(runner)], timeout_s=5)
        outcome = executor.run("payload")
        assert outcome.error_class == "none"
        assert outcome.stdout == "ran: payload"

    def test_missing_runner_becomes_launch_outcome(self):
        from graphcrew.execution import SandboxExecutor

        executor = SandboxExecutor(runner_cmd=["/does/not/exist/runner"], timeout_s=2)
        outcome = executor.run("print(1)")
        assert outcome.error_class == "launch"
        assert outcome.exit_status == 127

    def test_runner_without_envelope_is_launch_failure(self, tmp_path):
        from graphcrew.execution import SandboxExecutor

        runner = tmp_path / "silent.py"
        runner.write_text("print('not json')")
        executor = SandboxExecutor(runner_cmd=["python3", str(runner)], timeout_s=2)
        outcome = executor.run("print(1)")
        assert outcome.error_class == "launch"

    def test_stage_files_copied_into_workdir(self, tmp_path):
        from graphcrew.execution import SandboxExecutor

        # fake runner that reports the staged file names it can see
        runner = tmp_path / "lister.py"
        runner.write_text(
            "import json, os, sys\n"
            "workdir = sys.argv[sys.argv.index('--workdir') + 1]\n"
            "names = sorted(os.listdir(workdir))\n"
            "print(json.dumps({'stdout': ','.join(names), 'stderr': '', 'exit_code': 0, "
            "'duration_ms': 1, 'timed_out': False}))\n"
        )
        graph_file = tmp_path / "graph.edges"
        graph_file.write_text("0 1\n1 2\n")
        executor = SandboxExecutor(runner_cmd=["python3", str(runner)], timeout_s=5)
        outcome = executor.run("print(1)", stage_files=(str(graph_file),))
        assert "graph.edges" in outcome.stdout
        assert "script.py" in outcome.stdout
