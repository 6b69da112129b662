"""Problem solving: code generation with execute-and-repair retries, and
the direct-reasoning fallback used when every trial fails.

Each retry prompt carries all previously generated code and error messages
so the coding agent can repair its own output; the reasoning agent answers
without programming and is consulted only after the retry budget is spent.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .errors import BackendRefusal, NoCodeBlock
from .gateway import TemplateLibrary, UsageLedger, chat
from .knowledge import RetrievalResult
from .normalize import NormalizedQuestion

log = logging.getLogger(__name__)

STDERR_TAIL_CHARS = 2000
NO_CODE_ERROR = "no code produced"
NO_OUTPUT_ERROR = "no output produced"

_FENCED_BLOCK = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)
_FINAL_ANSWER = re.compile(r"<final_answer>(.*?)</final_answer>", re.DOTALL)


@dataclass(frozen=True)
class CodingAttempt:
    trial_index: int
    code: str
    result: str | None = None
    error: str | None = None
    commentary: str = ""

    def __post_init__(self):
        if (self.result is None) == (self.error is None):
            raise ValueError("exactly one of result/error must be present")


@dataclass(frozen=True)
class SolveResult:
    result: str | None
    provenance: str  # "coding" | "reasoning"
    attempts: list[CodingAttempt] = field(default_factory=list)

    @property
    def succeeded(self) -> bool:
        return self.result is not None


def extract_code_block(reply: str) -> str:
    """Return the last fenced code block verbatim (models often emit a
    corrected block after prose, so the last one wins)."""
    blocks = _FENCED_BLOCK.findall(reply)
    if not blocks:
        raise NoCodeBlock("reply contained no fenced code block")
    return blocks[-1]


def _strip_code_blocks(reply: str) -> str:
    return _FENCED_BLOCK.sub("", reply).strip()


def _history_text(history: list[CodingAttempt]) -> str:
    if not history:
        return "None"
    parts = []
    for attempt in history:
        parts.append(
            f"Attempt {attempt.trial_index} code:\n```python\n{attempt.code}\n```\n"
            f"Attempt {attempt.trial_index} error: {attempt.error}"
        )
    return "\n\n".join(parts)


def generate_code(
    q: NormalizedQuestion,
    knowledge: RetrievalResult | None,
    history: list[CodingAttempt],
    backend,
    templates: TemplateLibrary,
    ledger: UsageLedger,
) -> tuple[str, str]:
    """One coding-agent call; returns (code, surrounding commentary)."""
    prompt = templates.render(
        "coding",
        knowledge=knowledge.as_prompt_text() if knowledge else "None",
        reformatted_problem=q.refined_question,
        graph_type=q.graph_type,
        input_data=q.input_data,
        output_format=q.output_format if q.output_format is not None else "None",
        error_message=_history_text(history),
    )
    reply = chat(backend, ledger, "coding", prompt)
    return extract_code_block(reply), _strip_code_blocks(reply)


def _error_text(outcome) -> str:
    tail = outcome.stderr[-STDERR_TAIL_CHARS:]
    return f"{outcome.error_class}: {tail}" if tail else outcome.error_class


def attempt_with_retries(
    q: NormalizedQuestion,
    knowledge: RetrievalResult | None,
    executor,
    n_retry: int,
    backend,
    templates: TemplateLibrary,
    ledger: UsageLedger,
    stage_files: tuple[str, ...] = (),
) -> SolveResult:
    """Generate-execute loop, at most *n_retry* trials.

    Stops at the first clean execution with nonempty stdout. A reply with
    no code block, or a run that exits cleanly while printing nothing,
    both count as failed attempts. When every trial fails the returned
    result is None; the caller is expected to fall back to reasoning.
    """
    attempts: list[CodingAttempt] = []
    for trial in range(1, n_retry + 1):
        try:
            code, commentary = generate_code(q, knowledge, attempts, backend, templates, ledger)
        except NoCodeBlock:
            attempts.append(CodingAttempt(trial, "", error=NO_CODE_ERROR))
            continue
        outcome = executor.run(code, stage_files)
        if outcome.error_class == "none":
            result = outcome.stdout.rstrip()
            if result:
                attempts.append(CodingAttempt(trial, code, result=result, commentary=commentary))
                return SolveResult(result, "coding", attempts)
            attempts.append(CodingAttempt(trial, code, error=NO_OUTPUT_ERROR, commentary=commentary))
        else:
            attempts.append(CodingAttempt(trial, code, error=_error_text(outcome), commentary=commentary))
    return SolveResult(None, "coding", attempts)


def reason_directly(
    q: NormalizedQuestion,
    backend,
    templates: TemplateLibrary,
    ledger: UsageLedger,
) -> str:
    """Answer without programming; strips the template's extraction tags."""
    prompt = templates.render(
        "reasoning",
        reformatted_question=q.refined_question,
        reformatted_problem=q.refined_question,
        input_data=q.input_data,
        output_format=q.output_format if q.output_format is not None else "None",
    )
    reply = chat(backend, ledger, "reasoning", prompt)
    match = _FINAL_ANSWER.search(reply)
    result = (match.group(1) if match else reply).strip()
    if not result:
        raise BackendRefusal("reasoning agent produced an empty answer")
    return result
