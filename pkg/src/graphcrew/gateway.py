"""Chat backends, prompt templates, and token-usage accounting.

Two backends implement the same ``complete(request) -> ChatResponse``
surface: :class:`OpenAIBackend` speaks the OpenAI-compatible
chat-completions wire format over HTTP, and :class:`MockBackend` replays a
deterministic script keyed by substring matching, which is what every
offline test in this repository runs against.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import requests

from .errors import (
    AuthError,
    BackendRefusal,
    MissingBinding,
    TransportError,
    UnknownTemplate,
)

log = logging.getLogger(__name__)

AGENT_ROLES = ("question", "search", "coding", "reasoning", "answer")

_PLACEHOLDER = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


# ---------------------------------------------------------------------------
# Prompt templates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PromptTemplate:
    """A prompt body with ``{placeholder}`` slots."""

    name: str
    body: str

    def __post_init__(self):
        names = self.placeholders
        if len(names) != len(set(names)):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"template {self.name!r} repeats placeholders: {dupes}")

    @property
    def placeholders(self) -> tuple[str, ...]:
        return tuple(_PLACEHOLDER.findall(self.body))


def render_prompt(template: PromptTemplate, bindings: dict[str, str]) -> str:
    """Substitute every placeholder in one pass.

    Single-pass substitution keeps binding values verbatim even when a
    value itself contains ``{...}`` sequences.
    """
    for name in template.placeholders:
        if name not in bindings:
            raise MissingBinding(name)
    return _PLACEHOLDER.sub(lambda m: bindings[m.group(1)], template.body)


class TemplateLibrary:
    """The five agent templates, loaded from a directory of .txt assets."""

    def __init__(self, templates: dict[str, PromptTemplate]):
        self._templates = dict(templates)

    @classmethod
    def load(cls, directory: str | Path | None = None) -> "TemplateLibrary":
        """Load one template per agent role; default to the bundled assets."""
        if directory is None:
            directory = Path(__file__).parent / "templates"
        directory = Path(directory)
        templates = {}
        for role in AGENT_ROLES:
            path = directory / f"{role}.txt"
            templates[role] = PromptTemplate(role, path.read_text(encoding="utf-8"))
        return cls(templates)

    def get(self, name: str) -> PromptTemplate:
        try:
            return self._templates[name]
        except KeyError:
            raise UnknownTemplate(name) from None

    def render(self, name: str, **bindings: str) -> str:
        return render_prompt(self.get(name), bindings)


# ---------------------------------------------------------------------------
# Requests / responses / ledger
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChatRequest:
    user_text: str
    system_text: str = ""
    temperature: float = 0.0
    max_output_tokens: int = 2048

    def __post_init__(self):
        if not self.user_text:
            raise ValueError("user_text must be nonempty")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must lie in [0, 2]")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")

    @property
    def prompt_chars(self) -> int:
        return len(self.system_text) + len(self.user_text)


@dataclass(frozen=True)
class ChatResponse:
    """Completion text plus token usage; counts are None when the backend
    reported no usage at all (estimation then happens at record time)."""

    text: str
    input_tokens: int | None
    output_tokens: int | None
    backend_id: str
    prompt_chars: int = 0


def _estimate_tokens(char_count: int) -> int:
    return -(-char_count // 4)


class UsageLedger:
    """Cumulative per-role token counters; thread safe.

    ``on_record`` is an optional hook called once per recording with the
    role name; the pipeline uses it to keep an ordered agent-call log.
    """

    def __init__(self, estimate_missing: bool = True, on_record=None):
        self.estimate_missing = estimate_missing
        self.on_record = on_record
        self._lock = threading.Lock()
        self._roles: dict[str, list[int]] = {}

    def record(self, role: str, response: ChatResponse) -> None:
        if role not in AGENT_ROLES:
            raise ValueError(f"unknown agent role: {role!r}")
        tokens_in = response.input_tokens
        tokens_out = response.output_tokens
        if tokens_in is None:
            tokens_in = _estimate_tokens(response.prompt_chars) if self.estimate_missing else 0
        if tokens_out is None:
            tokens_out = _estimate_tokens(len(response.text)) if self.estimate_missing else 0
        with self._lock:
            bucket = self._roles.setdefault(role, [0, 0])
            bucket[0] += tokens_in
            bucket[1] += tokens_out
        if self.on_record is not None:
            self.on_record(role)

    @property
    def role_totals(self) -> dict[str, tuple[int, int]]:
        with self._lock:
            return {role: (v[0], v[1]) for role, v in self._roles.items()}

    @property
    def total_input(self) -> int:
        with self._lock:
            return sum(v[0] for v in self._roles.values())

    @property
    def total_output(self) -> int:
        with self._lock:
            return sum(v[1] for v in self._roles.values())

    @property
    def grand_total(self) -> int:
        with self._lock:
            return sum(v[0] + v[1] for v in self._roles.values())

    def snapshot(self) -> dict:
        with self._lock:
            roles = {
                role: {"input": v[0], "output": v[1]} for role, v in sorted(self._roles.items())
            }
        total_in = sum(v["input"] for v in roles.values())
        total_out = sum(v["output"] for v in roles.values())
        return {
            "roles": roles,
            "input": total_in,
            "output": total_out,
            "total": total_in + total_out,
        }


def record_usage(ledger: UsageLedger, role: str, response: ChatResponse) -> UsageLedger:
    ledger.record(role, response)
    return ledger


# ---------------------------------------------------------------------------
# Backends
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MockEntry:
    match: str
    response: str
    input_tokens: int | None = None
    output_tokens: int | None = None


class MockBackend:
    """Scripted backend: ordered (substring matcher, reply) pairs.

    Matching is stateless, so identical request sequences always produce
    identical response sequences and concurrent callers cannot interfere.
    Every request is captured in ``calls`` for prompt assertions.
    """

    backend_id = "mock"

    def __init__(self, entries: list[MockEntry]):
        self.entries = list(entries)
        self.calls: list[ChatRequest] = []
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> "MockBackend":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        entries = [
            MockEntry(
                match=item["match"],
                response=item["response"],
                input_tokens=item.get("input_tokens"),
                output_tokens=item.get("output_tokens"),
            )
            for item in raw
        ]
        return cls(entries)

    def complete(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.calls.append(request)
        probe = request.system_text + "\n" + request.user_text
        for entry in self.entries:
            if entry.match in probe:
                if entry.response == "":
                    raise BackendRefusal("mock script produced an empty completion")
                return ChatResponse(
                    text=entry.response,
                    input_tokens=entry.input_tokens,
                    output_tokens=entry.output_tokens,
                    backend_id=self.backend_id,
                    prompt_chars=request.prompt_chars,
                )
        raise BackendRefusal("no mock script entry matched the prompt")

    def prompts(self) -> list[str]:
        with self._lock:
            return [c.user_text for c in self.calls]


class OpenAIBackend:
    """Chat-completions client for any OpenAI-compatible endpoint.

    Transport failures and HTTP >= 500 are retried with exponential
    backoff (1s, 2s, 4s, ... between attempts); 401/403 surface
    immediately as AuthError.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str = "",
        retry_attempts: int = 3,
        backoff_base: float = 1.0,
        request_timeout_s: float = 120.0,
        post=None,
        sleep=None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.retry_attempts = max(1, retry_attempts)
        self.backoff_base = backoff_base
        self.request_timeout_s = request_timeout_s
        self._post = post or requests.post
        self._sleep = sleep or time.sleep
        self.backend_id = f"openai:{model}"

    @classmethod
    def from_env(cls, **kwargs) -> "OpenAIBackend":
        base = os.environ.get("LLM_API_BASE", "")
        model = os.environ.get("LLM_MODEL", "")
        if not base or not model:
            raise ValueError("LLM_API_BASE and LLM_MODEL must be set for the remote backend")
        return cls(base, model, api_key=os.environ.get("LLM_API_KEY", ""), **kwargs)

    def complete(self, request: ChatRequest) -> ChatResponse:
        messages = []
        if request.system_text:
            messages.append({"role": "system", "content": request.system_text})
        messages.append({"role": "user", "content": request.user_text})
        payload = {
            "model": self.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        last_error: Exception | None = None
        for attempt in range(1, self.retry_attempts + 1):
            try:
                resp = self._post(
                    f"{self.base_url}/chat/completions",
                    json=payload,
                    headers=headers,
                    timeout=self.request_timeout_s,
                )
            except requests.RequestException as exc:
                last_error = exc
                log.warning("chat transport failure (attempt %d/%d): %s", attempt, self.retry_attempts, exc)
            else:
                if resp.status_code in (401, 403):
                    raise AuthError(f"chat endpoint rejected credentials (HTTP {resp.status_code})")
                if resp.status_code >= 500:
                    last_error = TransportError(f"HTTP {resp.status_code} from chat endpoint")
                    log.warning("chat HTTP %d (attempt %d/%d)", resp.status_code, attempt, self.retry_attempts)
                elif resp.status_code >= 400:
                    raise TransportError(f"HTTP {resp.status_code} from chat endpoint: {resp.text[:500]}")
                else:
                    return self._parse(resp, request)
            if attempt < self.retry_attempts:
                self._sleep(self.backoff_base * (2 ** (attempt - 1)))
        raise TransportError(f"chat request failed after {self.retry_attempts} attempts: {last_error}")

    def _parse(self, resp, request: ChatRequest) -> ChatResponse:
        try:
            body = resp.json()
            text = body["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError) as exc:
            raise TransportError(f"malformed chat-completions response: {exc}") from exc
        if not text:
            raise BackendRefusal("backend returned an empty completion")
        usage = body.get("usage") or {}
        return ChatResponse(
            text=text,
            input_tokens=usage.get("prompt_tokens"),
            output_tokens=usage.get("completion_tokens"),
            backend_id=self.backend_id,
            prompt_chars=request.prompt_chars,
        )


def chat(backend, ledger: UsageLedger, role: str, user_text: str, **request_kwargs) -> str:
    """One agent call: complete the request and record usage under *role*."""
    response = backend.complete(ChatRequest(user_text=user_text, **request_kwargs))
    ledger.record(role, response)
    return response.text
