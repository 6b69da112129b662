"""Script executors behind one ``run(code, stage_files) -> ExecutionOutcome``
surface.

``SandboxExecutor`` shells out to the external runner CLI (one process per
script, private workdir, JSON envelope on stdout). ``StubExecutor`` is the
in-memory test double: it maps code text, or plain call order, to scripted
outcomes.
"""

from __future__ import annotations

import json
import logging
import shutil
import subprocess
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path

log = logging.getLogger(__name__)

ERROR_CLASSES = ("none", "syntax", "runtime", "timeout", "launch")


@dataclass(frozen=True)
class ExecutionOutcome:
    stdout: str
    stderr: str
    exit_status: int
    duration_ms: int
    timed_out: bool
    error_class: str

    def __post_init__(self):
        if self.error_class not in ERROR_CLASSES:
            raise ValueError(f"unknown error_class: {self.error_class!r}")
        clean = self.exit_status == 0 and not self.timed_out
        if (self.error_class == "none") != clean:
            raise ValueError("error_class must be 'none' exactly when exit 0 and not timed out")


def ok(stdout: str, duration_ms: int = 1) -> ExecutionOutcome:
    return ExecutionOutcome(stdout, "", 0, duration_ms, False, "none")


def fail(stderr: str, error_class: str = "runtime", exit_status: int = 1) -> ExecutionOutcome:
    return ExecutionOutcome("", stderr, exit_status, 1, False, error_class)


def timed_out(duration_ms: int = 1000) -> ExecutionOutcome:
    return ExecutionOutcome("", "", 124, duration_ms, True, "timeout")


def classify_envelope(envelope: dict) -> ExecutionOutcome:
    """Map a runner result envelope onto an ExecutionOutcome."""
    stdout = str(envelope.get("stdout", ""))
    stderr = str(envelope.get("stderr", ""))
    exit_code = int(envelope.get("exit_code", 127))
    duration_ms = int(envelope.get("duration_ms", 0))
    was_timeout = bool(envelope.get("timed_out", False))
    if was_timeout:
        error_class = "timeout"
    elif exit_code == 0:
        error_class = "none"
    elif exit_code == 127:
        error_class = "launch"
    elif "SyntaxError" in stderr or "IndentationError" in stderr:
        error_class = "syntax"
    else:
        error_class = "runtime"
    return ExecutionOutcome(stdout, stderr, exit_code, duration_ms, was_timeout, error_class)


class StubExecutor:
    """Scripted executor for tests.

    Mapping mode matches code text against ordered substring rules
    (first match wins); sequence mode replays a fixed list of outcomes and
    repeats the last one. Every call is recorded in ``calls``.
    """

    def __init__(self, rules: list[tuple[str, ExecutionOutcome]] | None = None,
                 default: ExecutionOutcome | None = None):
        self.rules = list(rules or [])
        self.default = default
        self._sequence: list[ExecutionOutcome] | None = None
        self._cursor = 0
        self._lock = threading.Lock()
        self.calls: list[dict] = []

    @classmethod
    def sequence(cls, outcomes: list[ExecutionOutcome]) -> "StubExecutor":
        stub = cls()
        stub._sequence = list(outcomes)
        return stub

    def run(self, code: str, stage_files: tuple[str, ...] = ()) -> ExecutionOutcome:
        with self._lock:
            self.calls.append({"code": code, "stage_files": tuple(stage_files)})
            if self._sequence is not None:
                outcome = self._sequence[min(self._cursor, len(self._sequence) - 1)]
                self._cursor += 1
                return outcome
        for needle, outcome in self.rules:
            if needle in code:
                return outcome
        if self.default is not None:
            return self.default
        return fail("stub executor had no rule for this code", "runtime")


class SandboxExecutor:
    """Subprocess binding to the sandbox runner CLI.

    Per call it provisions a private workdir, stages any graph files the
    pipeline asked for, writes the script, and invokes
    ``runner <code-file> --timeout S --workdir DIR --interpreter CMD``.
    The runner's single-line JSON envelope becomes the outcome; any
    failure to obtain an envelope is reported as a launch-class outcome
    rather than an exception, so a broken executor degrades into the
    pipeline's normal retry-then-reason path.
    """

    def __init__(
        self,
        runner_cmd: list[str],
        interpreter_cmd: list[str] | None = None,
        timeout_s: float = 30.0,
    ):
        self.runner_cmd = list(runner_cmd)
        self.interpreter_cmd = list(interpreter_cmd or ["python3"])
        self.timeout_s = timeout_s

    def run(self, code: str, stage_files: tuple[str, ...] = ()) -> ExecutionOutcome:
        workdir = Path(tempfile.mkdtemp(prefix="graphcrew-run-"))
        try:
            for source in stage_files:
                source = Path(source)
                if source.is_file():
                    shutil.copy2(source, workdir / source.name)
            code_file = workdir / "script.py"
            code_file.write_text(code, encoding="utf-8")
            command = self.runner_cmd + [
                str(code_file),
                "--timeout",
                str(self.timeout_s),
                "--workdir",
                str(workdir),
                "--interpreter",
                " ".join(self.interpreter_cmd),
            ]
            try:
                proc = subprocess.run(
                    command,
                    capture_output=True,
                    text=True,
                    timeout=self.timeout_s + 15,
                )
            except FileNotFoundError as exc:
                return fail(f"runner command not found: {exc}", "launch", 127)
            except subprocess.TimeoutExpired:
                return fail("runner process hung past its grace period", "launch", 127)
            return self._parse_envelope(proc)
        finally:
            shutil.rmtree(workdir, ignore_errors=True)

    def _parse_envelope(self, proc) -> ExecutionOutcome:
        if proc.returncode != 0:
            return fail(
                f"runner exited {proc.returncode}: {proc.stderr.strip()[:500]}",
                "launch",
                127,
            )
        for line in proc.stdout.splitlines():
            line = line.strip()
            if not line.startswith("{"):
                continue
            try:
                envelope = json.loads(line)
            except ValueError:
                continue
            return classify_envelope(envelope)
        return fail("runner emitted no result envelope", "launch", 127)
