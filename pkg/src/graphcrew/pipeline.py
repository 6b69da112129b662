"""The end-to-end inference pipeline and its batch driver.

One run is strictly sequential: normalize the question, retrieve
knowledge, try the coding agent up to the retry budget, fall back to the
reasoning agent only if every trial failed, then pass the result through
the answer agent. Every stage lands in a trace, and failures still yield
a formatted (wrong) answer so downstream scoring sees a string for every
item.
"""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import BackendRefusal, NormalizationParseError, TransportError
from .execution import SandboxExecutor, StubExecutor
from .experience import ProblemRecord, SolverOutput
from .gateway import MockBackend, OpenAIBackend, TemplateLibrary, UsageLedger
from .knowledge import (
    ExperienceEntry,
    KnowledgeBase,
    LocalHashEmbedder,
    RemoteEmbedder,
    RetrievalResult,
)
from .normalize import AnswerDraft, RawQuestion, format_answer, normalize_question
from .solving import CodingAttempt, SolveResult, attempt_with_retries, reason_directly

log = logging.getLogger(__name__)

FAILURE_PREFIX = "[failed]"

STATUS_CODE = "solved_by_code"
STATUS_REASONING = "solved_by_reasoning"
STATUS_FAILED = "failed"


@dataclass
class PipelineConfig:
    """Knobs for one pipeline deployment; defaults follow the reference
    operating point (gate 0.85, three retries, three self-checks, ten
    candidate experiences)."""

    delta: float = 0.85
    n_retry: int = 3
    n_check: int = 3
    n_exp: int = 10
    top_k_docs: int = 3
    timeout_s: float = 30.0
    backend_kind: str = "openai"  # "openai" | "mock"
    backend_base_url: str | None = None
    backend_model: str | None = None
    backend_api_key_env: str = "LLM_API_KEY"
    mock_script: str | None = None
    interpreter_cmd: list[str] = field(default_factory=lambda: ["python3"])
    runner_cmd: list[str] | None = None
    docs_path: str | None = None
    experiences_path: str | None = None
    index_dir: str | None = None
    embedder: str = "local"  # "local" | "remote"
    embed_dimension: int = 256
    embed_base_url: str | None = None
    embed_model: str | None = None
    templates_dir: str | None = None

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")
        for name in ("n_retry", "n_check", "n_exp", "top_k_docs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be positive")

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {k: v for k, v in raw.items() if k in cls.__dataclass_fields__}
        unknown = set(raw) - set(known)
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**known)

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


@dataclass
class StageRecord:
    name: str
    started: float
    finished: float
    calls: list[str] = field(default_factory=list)

    @property
    def elapsed_ms(self) -> int:
        return int((self.finished - self.started) * 1000)


@dataclass
class FinalAnswer:
    text: str
    status: str


@dataclass
class PipelineTrace:
    item_id: str | None
    question: str
    stages: list[StageRecord] = field(default_factory=list)
    normalized: dict | None = None
    retrieval_kind: str | None = None
    retrieval_scores: list[tuple[str, float]] = field(default_factory=list)
    attempts: list[CodingAttempt] = field(default_factory=list)
    provenance: str | None = None
    reasoning_used: bool = False
    answer_drafts: list[AnswerDraft] = field(default_factory=list)
    final_text: str = ""
    status: str = STATUS_FAILED
    usage: dict = field(default_factory=dict)
    agent_calls: list[str] = field(default_factory=list)
    started: float = 0.0
    finished: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "question": self.question,
            "stages": [
                {
                    "name": s.name,
                    "started": s.started,
                    "finished": s.finished,
                    "elapsed_ms": s.elapsed_ms,
                    "calls": s.calls,
                }
                for s in self.stages
            ],
            "normalized": self.normalized,
            "retrieval": {"kind": self.retrieval_kind, "scores": self.retrieval_scores},
            "attempts": [
                {
                    "trial_index": a.trial_index,
                    "code": a.code,
                    "result": a.result,
                    "error": a.error,
                }
                for a in self.attempts
            ],
            "provenance": self.provenance,
            "reasoning_used": self.reasoning_used,
            "answer_drafts": [
                {"iteration": d.iteration, "text": d.text, "need_adjustment": d.need_adjustment}
                for d in self.answer_drafts
            ],
            "final": {"text": self.final_text, "status": self.status},
            "usage": self.usage,
            "agent_calls": self.agent_calls,
            "started": self.started,
            "finished": self.finished,
        }


def _retrieval_score_pairs(result: RetrievalResult) -> list[tuple[str, float]]:
    pairs = []
    for entry, score in result.entries:
        key = getattr(entry, "api_name", None) or getattr(entry, "problem_type", "?")
        pairs.append((key, score))
    return pairs


def detect_stage_files(input_data: str) -> tuple[str, ...]:
    """Find graph files named by the input data so they can be copied into
    the sandbox workdir. Inline payloads (which can be huge) are only
    checked as a whole, never token by token."""
    candidates = [input_data.strip().strip("'\"")]
    if len(input_data) < 4096:
        candidates.extend(token.strip("'\",;") for token in input_data.split())
    found = []
    for candidate in candidates:
        if not candidate or len(candidate) > 512:
            continue
        try:
            if os.path.isfile(candidate) and candidate not in found:
                found.append(candidate)
        except (OSError, ValueError):
            continue
    return tuple(found)


class Orchestrator:
    """Owns the wired components and runs the pipeline over questions."""

    def __init__(
        self,
        config: PipelineConfig,
        backend,
        templates: TemplateLibrary | None = None,
        kb: KnowledgeBase | None = None,
        executor=None,
    ):
        self.config = config
        self.backend = backend
        self.templates = templates or TemplateLibrary.load(config.templates_dir)
        self.kb = kb
        self.executor = executor or StubExecutor()

    @classmethod
    def from_config(cls, config: PipelineConfig) -> "Orchestrator":
        if config.backend_kind == "mock":
            if not config.mock_script:
                raise ValueError("mock backend requires mock_script")
            backend = MockBackend.from_file(config.mock_script)
        else:
            backend = OpenAIBackend(
                base_url=config.backend_base_url or os.environ.get("LLM_API_BASE", ""),
                model=config.backend_model or os.environ.get("LLM_MODEL", ""),
                api_key=os.environ.get(config.backend_api_key_env, ""),
            )
            if not backend.base_url or not backend.model:
                raise ValueError("remote backend needs backend_base_url/backend_model or LLM_API_BASE/LLM_MODEL")

        kb = None
        if config.index_dir and Path(config.index_dir, "manifest.json").is_file():
            kb = KnowledgeBase.load(config.index_dir, cls._build_embedder(config))
        elif config.docs_path or config.experiences_path:
            kb = KnowledgeBase(cls._build_embedder(config), top_k_docs=config.top_k_docs, delta_default=config.delta)
            if config.docs_path:
                kb.ingest_docs(config.docs_path)
            if config.experiences_path:
                kb.load_experiences(config.experiences_path)

        executor = SandboxExecutor(
            runner_cmd=config.runner_cmd or ["runner"],
            interpreter_cmd=config.interpreter_cmd,
            timeout_s=config.timeout_s,
        )
        return cls(config, backend, TemplateLibrary.load(config.templates_dir), kb, executor)

    @staticmethod
    def _build_embedder(config: PipelineConfig):
        if config.embedder == "remote":
            return RemoteEmbedder(
                base_url=config.embed_base_url or os.environ.get("LLM_API_BASE", ""),
                model=config.embed_model or "",
                api_key=os.environ.get(config.backend_api_key_env, ""),
            )
        return LocalHashEmbedder(config.embed_dimension)

    # ------------------------------------------------------------------

    def solve(
        self,
        raw: RawQuestion,
        retrieval_override: RetrievalResult | None = None,
        include_experience: bool = True,
    ) -> tuple[FinalAnswer, PipelineTrace]:
        """Run the full pipeline on one question.

        ``retrieval_override`` injects a fixed retrieval result (used when
        scoring candidate experiences); ``include_experience=False`` keeps
        retrieval active but skips the experience gate (the collection
        solver)."""
        calls: list[str] = []
        ledger = UsageLedger(on_record=lambda role: calls.append(role))
        trace = PipelineTrace(item_id=raw.item_id, question=raw.text)
        trace.started = time.time()
        config = self.config

        def stage(name: str):
            return _StageTimer(trace, name, calls)

        question = None
        result_text: str | None = None
        status = STATUS_FAILED

        with stage("question"):
            try:
                question = normalize_question(raw, self.backend, self.templates, ledger)
                trace.normalized = vars(question).copy()
            except NormalizationParseError as exc:
                log.warning("question %s: normalization failed: %s", raw.item_id, exc)
                result_text = f"{FAILURE_PREFIX} question normalization: {exc}"

        if question is not None:
            with stage("search"):
                calls.append("search")
                if retrieval_override is not None:
                    retrieval = retrieval_override
                elif self.kb is not None:
                    retrieval = self.kb.search(
                        question.refined_question,
                        question.graph_type,
                        config.delta,
                        include_experience=include_experience,
                    )
                else:
                    retrieval = RetrievalResult("empty")
                trace.retrieval_kind = retrieval.kind
                trace.retrieval_scores = _retrieval_score_pairs(retrieval)

            with stage("coding"):
                stage_files = detect_stage_files(question.input_data)
                solve_result = attempt_with_retries(
                    question,
                    retrieval,
                    self.executor,
                    config.n_retry,
                    self.backend,
                    self.templates,
                    ledger,
                    stage_files,
                )
                trace.attempts = solve_result.attempts

            if solve_result.succeeded:
                result_text = solve_result.result
                status = STATUS_CODE
            else:
                with stage("reasoning"):
                    trace.reasoning_used = True
                    last_error = solve_result.attempts[-1].error if solve_result.attempts else "?"
                    try:
                        result_text = reason_directly(question, self.backend, self.templates, ledger)
                        status = STATUS_REASONING
                        solve_result = SolveResult(result_text, "reasoning", solve_result.attempts)
                    except (BackendRefusal, TransportError) as exc:
                        log.warning("question %s: reasoning failed: %s", raw.item_id, exc)
                        result_text = f"{FAILURE_PREFIX} no result; last coding error: {last_error}"
            trace.provenance = solve_result.provenance if status != STATUS_FAILED else None

        with stage("answer"):
            final_text = format_answer(
                question.output_format if question is not None else None,
                result_text,
                self.backend,
                self.templates,
                ledger,
                config.n_check,
                drafts=trace.answer_drafts,
            )

        trace.finished = time.time()
        trace.final_text = final_text
        trace.status = status
        trace.usage = ledger.snapshot()
        trace.agent_calls = list(calls)
        return FinalAnswer(final_text, status), trace

    def solve_batch(
        self,
        items: list[RawQuestion],
        parallelism: int = 1,
    ) -> list[tuple[FinalAnswer, PipelineTrace]]:
        """Solve many questions with at most *parallelism* in flight;
        results align positionally with the inputs and one item's failure
        never aborts the batch."""
        if parallelism < 1:
            raise ValueError("parallelism must be >= 1")

        def guarded(item: RawQuestion) -> tuple[FinalAnswer, PipelineTrace]:
            try:
                return self.solve(item)
            except Exception as exc:  # noqa: BLE001 - isolation contract
                log.error("question %s: pipeline error: %s", item.item_id, exc)
                trace = PipelineTrace(item_id=item.item_id, question=item.text)
                trace.started = trace.finished = time.time()
                trace.final_text = f"{FAILURE_PREFIX} pipeline error: {exc}"
                return FinalAnswer(trace.final_text, STATUS_FAILED), trace

        if parallelism == 1:
            return [guarded(item) for item in items]
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            return list(pool.map(guarded, items))


class _StageTimer:
    def __init__(self, trace: PipelineTrace, name: str, calls: list[str]):
        self.trace = trace
        self.name = name
        self.calls = calls

    def __enter__(self):
        self.start = time.time()
        self.call_mark = len(self.calls)
        return self

    def __exit__(self, exc_type, exc, tb):
        record = StageRecord(
            self.name,
            self.start,
            time.time(),
            calls=self.calls[self.call_mark :],
        )
        self.trace.stages.append(record)
        return False


class PipelineSolver:
    """Adapter exposing the pipeline as the experience-collection solver.

    With no experience it runs the normal pipeline but skips the
    experience gate (documentation retrieval stays active); with one it
    injects that entry as the retrieval result. The solved answer is the
    answer-agent output, and meta info carries the successful trial's code
    and commentary."""

    def __init__(self, orchestrator: Orchestrator):
        self.orchestrator = orchestrator

    def solve(self, record: ProblemRecord, experience: ExperienceEntry | None) -> SolverOutput:
        raw = RawQuestion(record.question, item_id=record.id)
        if experience is None:
            answer, trace = self.orchestrator.solve(raw, include_experience=False)
        else:
            override = RetrievalResult("experience", [(experience, 1.0)], 1.0)
            answer, trace = self.orchestrator.solve(raw, retrieval_override=override)
        code = ""
        thought = ""
        if answer.status == STATUS_CODE:
            for attempt in trace.attempts:
                if attempt.error is None:
                    code = attempt.code
                    thought = attempt.commentary
                    break
        return SolverOutput(answer=answer.text, thought=thought, code=code)


def write_trace(trace: PipelineTrace, directory: str | Path) -> Path:
    """Persist one trace as JSON under *directory*."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    name = trace.item_id if trace.item_id else f"q{abs(hash(trace.question)) % 10**8}"
    path = directory / f"{name}.json"
    path.write_text(json.dumps(trace.to_json_dict(), indent=2, ensure_ascii=False), encoding="utf-8")
    return path
