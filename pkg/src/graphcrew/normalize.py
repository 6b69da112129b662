"""Question intake and answer formatting.

The question agent turns a raw problem statement into the four-field
normalized form (refined question, graph type, input data, output format);
the answer agent iteratively reshapes the solver's result toward the
required output format, stopping as soon as no adjustment is requested.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass

from .errors import NormalizationParseError, ParseFailure
from .gateway import TemplateLibrary, UsageLedger, chat

log = logging.getLogger(__name__)

_REFINED_KEYS = ("reformatted_problem", "refined_question", "reformatted_question")
_ABSENT_WORDS = ("", "none", "null")


@dataclass(frozen=True)
class RawQuestion:
    text: str
    item_id: str | None = None

    def __post_init__(self):
        if not self.text:
            raise ValueError("question text must be nonempty")


@dataclass(frozen=True)
class NormalizedQuestion:
    refined_question: str
    graph_type: str
    input_data: str
    output_format: str | None = None

    def __post_init__(self):
        if not (self.refined_question and self.graph_type and self.input_data):
            raise ValueError("refined_question, graph_type, and input_data must be nonempty")


@dataclass(frozen=True)
class AnswerDraft:
    iteration: int
    text: str
    need_adjustment: bool | None = None


# ---------------------------------------------------------------------------
# Lenient JSON extraction
# ---------------------------------------------------------------------------

_PY_LITERALS = (
    (re.compile(r"\bTrue\b"), "true"),
    (re.compile(r"\bFalse\b"), "false"),
    (re.compile(r"\bNone\b"), "null"),
)


def _scan_objects(text: str) -> dict | None:
    decoder = json.JSONDecoder()
    pos = text.find("{")
    while pos != -1:
        try:
            value, _ = decoder.raw_decode(text, pos)
        except ValueError:
            pass
        else:
            if isinstance(value, dict):
                return value
        pos = text.find("{", pos + 1)
    return None


def parse_agent_json(model_text: str) -> dict:
    """Extract the first JSON object in a model reply.

    Tolerates code fences, leading/trailing prose, and Python-style
    True/False/None literals (the answer prompt itself advertises
    True/False). Top-level keys come back lowercased so callers can match
    field names case-insensitively.
    """
    found = _scan_objects(model_text)
    if found is None:
        patched = model_text
        for pattern, replacement in _PY_LITERALS:
            patched = pattern.sub(replacement, patched)
        found = _scan_objects(patched)
    if found is None:
        raise ParseFailure("no JSON object found in model reply")
    return {str(k).lower(): v for k, v in found.items()}


def _as_text(value) -> str:
    if isinstance(value, str):
        return value
    return json.dumps(value, ensure_ascii=False)


def _absent_if_none(value) -> str | None:
    if value is None:
        return None
    text = _as_text(value).strip()
    if text.lower() in _ABSENT_WORDS:
        return None
    return text


def _as_bool(value) -> bool | None:
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        lowered = value.strip().lower()
        if lowered in ("true", "yes"):
            return True
        if lowered in ("false", "no"):
            return False
    return None


# ---------------------------------------------------------------------------
# Question agent
# ---------------------------------------------------------------------------


def _fields_to_question(fields: dict) -> NormalizedQuestion | None:
    refined = ""
    for key in _REFINED_KEYS:
        if fields.get(key):
            refined = _as_text(fields[key]).strip()
            break
    input_data = _as_text(fields.get("input_data", "")).strip()
    if not refined or not input_data:
        return None
    graph_type = _as_text(fields.get("graph_type", "")).strip() or "undirected"
    return NormalizedQuestion(
        refined_question=refined,
        graph_type=graph_type,
        input_data=input_data,
        output_format=_absent_if_none(fields.get("output_format")),
    )


def normalize_question(
    raw: RawQuestion,
    backend,
    templates: TemplateLibrary,
    ledger: UsageLedger,
) -> NormalizedQuestion:
    """Run the question agent and parse its JSON reply.

    On an unparseable reply the agent is re-asked once with an appended
    "Reply with only the JSON object." instruction; a second failure
    raises NormalizationParseError.
    """
    prompt = templates.render("question", original_question=raw.text)
    last_problem = "unparseable reply"
    for attempt in range(2):
        text = chat(backend, ledger, "question", prompt)
        try:
            fields = parse_agent_json(text)
        except ParseFailure as exc:
            last_problem = str(exc)
        else:
            question = _fields_to_question(fields)
            if question is not None:
                return question
            last_problem = "reply lacked a nonempty refined question or input data"
        if attempt == 0:
            log.debug("question-agent reply rejected (%s); retrying once", last_problem)
            prompt = prompt + "\nReply with only the JSON object."
    raise NormalizationParseError(f"question agent reply unusable after retry: {last_problem}")


# ---------------------------------------------------------------------------
# Answer agent
# ---------------------------------------------------------------------------


def format_answer(
    output_format: str | None,
    result: str,
    backend,
    templates: TemplateLibrary,
    ledger: UsageLedger,
    n_check: int = 3,
    drafts: list[AnswerDraft] | None = None,
) -> str:
    """Iteratively reformat *result* toward *output_format*.

    Runs at most *n_check* answer-agent calls and exits early once the
    agent reports need_adjustment false; with no output format the result
    passes through untouched with zero calls. A malformed reply keeps the
    previous draft and stops the loop.
    """
    if drafts is not None:
        drafts.append(AnswerDraft(0, result))
    if output_format is None:
        return result

    current = result
    for iteration in range(1, n_check + 1):
        prompt = templates.render("answer", output_format=output_format, output=current)
        reply = chat(backend, ledger, "answer", prompt)
        try:
            fields = parse_agent_json(reply)
        except ParseFailure:
            log.debug("answer-agent reply unparseable at iteration %d; keeping prior draft", iteration)
            break
        need = _as_bool(fields.get("need_adjustment"))
        if need is None:
            break
        if not need:
            if drafts is not None:
                drafts.append(AnswerDraft(iteration, current, False))
            break
        if "output" not in fields:
            break
        current = _as_text(fields["output"])
        if drafts is not None:
            drafts.append(AnswerDraft(iteration, current, True))
    return current
