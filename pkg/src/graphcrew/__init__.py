"""graphcrew: a five-agent LLM pipeline for natural-language graph reasoning.

A question agent normalizes the problem, a search step retrieves a solved
experience or API documentation from a two-tier knowledge base, a coding
agent writes and repairs Python until it runs, a reasoning agent answers
directly when code never succeeds, and an answer agent reshapes the result
to the required output format. The package also ships the batch job that
harvests the experience base and a benchmark harness with strict scoring.
"""

from .bench import (
    BenchmarkItem,
    EvalRecord,
    GnnSpecCheck,
    Report,
    exact_match,
    load_dataset,
    run_benchmark,
    score_gnn,
)
from .errors import GraphCrewError
from .execution import ExecutionOutcome, SandboxExecutor, StubExecutor
from .experience import (
    ProblemRecord,
    SolverOutput,
    collect_candidates,
    run_collection,
    score_utilities,
    select_best,
)
from .gateway import (
    ChatRequest,
    ChatResponse,
    MockBackend,
    OpenAIBackend,
    PromptTemplate,
    TemplateLibrary,
    UsageLedger,
    render_prompt,
)
from .knowledge import (
    DocEntry,
    ExperienceEntry,
    KnowledgeBase,
    LocalHashEmbedder,
    RetrievalResult,
    cosine,
    embed_text,
)
from .normalize import (
    NormalizedQuestion,
    RawQuestion,
    format_answer,
    normalize_question,
    parse_agent_json,
)
from .pipeline import (
    FinalAnswer,
    Orchestrator,
    PipelineConfig,
    PipelineSolver,
    PipelineTrace,
)
from .solving import CodingAttempt, SolveResult, attempt_with_retries, reason_directly

__version__ = "0.1.0"

__all__ = [
    "BenchmarkItem",
    "ChatRequest",
    "ChatResponse",
    "CodingAttempt",
    "DocEntry",
    "EvalRecord",
    "ExecutionOutcome",
    "ExperienceEntry",
    "FinalAnswer",
    "GnnSpecCheck",
    "GraphCrewError",
    "KnowledgeBase",
    "LocalHashEmbedder",
    "MockBackend",
    "NormalizedQuestion",
    "OpenAIBackend",
    "Orchestrator",
    "PipelineConfig",
    "PipelineSolver",
    "PipelineTrace",
    "ProblemRecord",
    "PromptTemplate",
    "RawQuestion",
    "Report",
    "RetrievalResult",
    "SandboxExecutor",
    "SolveResult",
    "SolverOutput",
    "StubExecutor",
    "TemplateLibrary",
    "UsageLedger",
    "attempt_with_retries",
    "collect_candidates",
    "cosine",
    "embed_text",
    "exact_match",
    "format_answer",
    "load_dataset",
    "normalize_question",
    "parse_agent_json",
    "reason_directly",
    "render_prompt",
    "run_benchmark",
    "run_collection",
    "score_gnn",
    "score_utilities",
    "select_best",
]
