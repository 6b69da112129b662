"""Two-tier knowledge base with gated similarity retrieval.

The base pairs an API-documentation index with a solved-problem experience
index. A query first scores the experiences: if the best cosine reaches
the gate threshold, that single experience is returned and documentation
is not consulted at all; otherwise the top documentation entries are
returned. Both indexes are exact exhaustive scans over unit vectors
(bases hold tens of entries, so nothing fancier is warranted).
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import requests

from .errors import DimensionMismatch, EmbeddingBackendError, SchemaError

log = logging.getLogger(__name__)

DEFAULT_TOP_K_DOCS = 3
DEFAULT_DIMENSION = 256


@dataclass(frozen=True)
class DocEntry:
    api_name: str
    description: str = ""
    parameters: str = ""
    returns: str = ""
    examples: str = ""

    def embed_text(self) -> str:
        return f"{self.api_name} {self.description}"

    def as_prompt_text(self) -> str:
        return (
            f"api_name: {self.api_name}\n"
            f"description: {self.description}\n"
            f"parameters: {self.parameters}\n"
            f"returns: {self.returns}\n"
            f"examples: {self.examples}"
        )


@dataclass(frozen=True)
class ExperienceEntry:
    question: str
    answer: str
    thought: str
    code: str
    problem_type: str

    def as_prompt_text(self) -> str:
        return (
            f"question: {self.question}\n"
            f"answer: {self.answer}\n"
            f"thought: {self.thought}\n"
            f"code:\n{self.code}"
        )


@dataclass(frozen=True)
class RetrievalResult:
    """What the search step hands to the solver: one experience, a ranked
    list of documentation entries, or nothing."""

    kind: str  # "experience" | "documentation" | "empty"
    entries: list[tuple[object, float]] = field(default_factory=list)
    top_score: float = 0.0

    def as_prompt_text(self) -> str:
        if not self.entries:
            return "None"
        return "\n\n".join(entry.as_prompt_text() for entry, _ in self.entries)


# ---------------------------------------------------------------------------
# Embedding providers
# ---------------------------------------------------------------------------


class LocalHashEmbedder:
    """Deterministic offline embedder: character 3-grams hashed into a
    fixed number of buckets, then L2-normalized."""

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        self.dimension = dimension
        self.provider_id = f"local-3gram-{dimension}"

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise ValueError("cannot embed empty text")
        vec = np.zeros(self.dimension, dtype=np.float64)
        grams = [text[i : i + 3] for i in range(len(text) - 2)] or [text]
        for gram in grams:
            digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
            vec[int.from_bytes(digest, "big") % self.dimension] += 1.0
        return vec / np.linalg.norm(vec)


class RemoteEmbedder:
    """Client for an OpenAI-compatible /embeddings endpoint."""

    def __init__(self, base_url: str, model: str, api_key: str = "", request_timeout_s: float = 60.0, post=None):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.request_timeout_s = request_timeout_s
        self._post = post or requests.post
        self.provider_id = f"remote-{model}"

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise ValueError("cannot embed empty text")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = self._post(
                f"{self.base_url}/embeddings",
                json={"model": self.model, "input": text},
                headers=headers,
                timeout=self.request_timeout_s,
            )
        except requests.RequestException as exc:
            raise EmbeddingBackendError(f"embedding request failed: {exc}") from exc
        if resp.status_code != 200:
            raise EmbeddingBackendError(f"embedding endpoint returned HTTP {resp.status_code}")
        try:
            values = resp.json()["data"][0]["embedding"]
        except (ValueError, LookupError, TypeError) as exc:
            raise EmbeddingBackendError(f"malformed embedding response: {exc}") from exc
        vec = np.asarray(values, dtype=np.float64)
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise EmbeddingBackendError("embedding endpoint returned a zero vector")
        return vec / norm


def embed_text(text: str, embedder=None) -> np.ndarray:
    """Unit-norm embedding of *text* (local fallback unless given a provider)."""
    return (embedder or LocalHashEmbedder()).embed(text)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatch(u.shape[-1], v.shape[-1])
    return float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))


# ---------------------------------------------------------------------------
# Exhaustive-scan vector index
# ---------------------------------------------------------------------------


class VectorIndex:
    """Exact nearest-neighbor index over unit vectors, keyed by string."""

    def __init__(self, dimension: int):
        self.dimension = dimension
        self._keys: list[str] = []
        self._rows: list[np.ndarray] = []
        self._positions: dict[str, int] = {}

    def __len__(self) -> int:
        return len(self._keys)

    @property
    def keys(self) -> list[str]:
        return list(self._keys)

    def upsert(self, key: str, vector: np.ndarray, pre_normalized: bool = False) -> None:
        """Insert or replace an entry; ``pre_normalized`` skips the unit
        scaling so persisted rows restore bit-exactly."""
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.dimension,):
            raise DimensionMismatch(vector.shape[-1], self.dimension)
        row = vector if pre_normalized else vector / np.linalg.norm(vector)
        if key in self._positions:
            self._rows[self._positions[key]] = row
        else:
            self._positions[key] = len(self._keys)
            self._keys.append(key)
            self._rows.append(row)

    def export_rows(self) -> np.ndarray:
        if not self._rows:
            return np.zeros((0, self.dimension))
        return np.stack(self._rows)

    def _scores(self, query: np.ndarray) -> np.ndarray:
        query = np.asarray(query, dtype=np.float64)
        if query.shape != (self.dimension,):
            raise DimensionMismatch(query.shape[-1], self.dimension)
        return np.stack(self._rows) @ (query / np.linalg.norm(query))

    def top(self, query: np.ndarray, k: int) -> list[tuple[str, float]]:
        """Best *k* entries ordered by descending score, ties broken by
        lexicographically smallest key."""
        if not self._keys:
            return []
        scores = self._scores(query)
        ranked = sorted(zip(self._keys, scores), key=lambda kv: (-kv[1], kv[0]))
        return [(key, float(score)) for key, score in ranked[:k]]

    def nearest(self, query: np.ndarray) -> tuple[str, float] | None:
        best = self.top(query, 1)
        return best[0] if best else None


# ---------------------------------------------------------------------------
# Knowledge base
# ---------------------------------------------------------------------------

_DOC_FIELDS = ("api_name", "description", "parameters", "returns", "examples")
_EXP_FIELDS = ("question", "answer", "thought", "code", "problem_type")


class KnowledgeBase:
    """Documentation base plus experience base behind one search gate.

    Searches are read-only and freely concurrent; ingestion takes the
    write lock. An index remembers which embedding provider built it and
    refuses queries from a different one.
    """

    def __init__(self, embedder=None, top_k_docs: int = DEFAULT_TOP_K_DOCS, delta_default: float = 0.85):
        self.embedder = embedder or LocalHashEmbedder()
        self.top_k_docs = top_k_docs
        self.delta_default = delta_default
        self.docs: dict[str, DocEntry] = {}
        self.experiences: dict[str, ExperienceEntry] = {}
        self._doc_index = VectorIndex(self._probe_dimension())
        self._exp_index = VectorIndex(self._doc_index.dimension)
        self._lock = threading.RLock()

    def _probe_dimension(self) -> int:
        dim = getattr(self.embedder, "dimension", None)
        if dim is None:
            dim = self.embedder.embed("dimension probe").shape[0]
        return int(dim)

    # -- ingestion ---------------------------------------------------------

    def add_doc(self, entry: DocEntry) -> None:
        with self._lock:
            self.docs[entry.api_name] = entry
            self._doc_index.upsert(entry.api_name, self.embedder.embed(entry.embed_text()))

    def ingest_docs(self, path: str | Path) -> int:
        """Load a JSON array of documentation records; duplicate api_name
        replaces the earlier entry."""
        records = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(records, list):
            raise SchemaError(0, "documentation file must hold a JSON array")
        count = 0
        for index, record in enumerate(records):
            if not isinstance(record, dict):
                raise SchemaError(index, "record is not an object")
            if not record.get("api_name"):
                raise SchemaError(index, "missing api_name")
            unknown = set(record) - set(_DOC_FIELDS)
            if unknown:
                raise SchemaError(index, f"unknown fields: {sorted(unknown)}")
            entry = DocEntry(**{name: str(record.get(name, "")) for name in _DOC_FIELDS})
            self.add_doc(entry)
            count += 1
        return count

    def add_experience(self, entry: ExperienceEntry) -> None:
        """Insert an experience, replacing any earlier one of the same
        problem type."""
        if not (entry.question and entry.answer and entry.code and entry.problem_type):
            raise ValueError("experience fields other than thought must be nonempty")
        with self._lock:
            self.experiences[entry.problem_type] = entry
            self._exp_index.upsert(entry.problem_type, self.embedder.embed(entry.question))

    def load_experiences(self, path: str | Path) -> int:
        records = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(records, list):
            raise SchemaError(0, "experience file must hold a JSON array")
        for index, record in enumerate(records):
            if not isinstance(record, dict):
                raise SchemaError(index, "record is not an object")
            missing = [name for name in _EXP_FIELDS if name != "thought" and not record.get(name)]
            if missing:
                raise SchemaError(index, f"missing fields: {missing}")
            self.add_experience(
                ExperienceEntry(**{name: str(record.get(name, "")) for name in _EXP_FIELDS})
            )
        return len(records)

    # -- retrieval ---------------------------------------------------------

    def search(
        self,
        refined_question: str,
        graph_type: str,
        delta: float | None = None,
        include_experience: bool = True,
    ) -> RetrievalResult:
        """Gated retrieval: the single best experience when its cosine
        reaches *delta* (inclusive), else the top documentation entries.

        ``include_experience=False`` forces the documentation route; the
        experience-collection job uses it to run the solver without the
        experience base.
        """
        if delta is None:
            delta = self.delta_default
        query = self.embedder.embed(f"{refined_question} {graph_type}")
        with self._lock:
            if not self.docs and not self.experiences:
                return RetrievalResult("empty")
            if include_experience and self.experiences:
                key, score = self._exp_index.nearest(query)
                if score >= delta:
                    return RetrievalResult("experience", [(self.experiences[key], score)], score)
            ranked = self._doc_index.top(query, self.top_k_docs)
            entries = [(self.docs[key], score) for key, score in ranked]
        top_score = entries[0][1] if entries else 0.0
        return RetrievalResult("documentation", entries, top_score)

    # -- persistence -------------------------------------------------------

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with self._lock:
            manifest = {
                "provider_id": self.embedder.provider_id,
                "dimension": self._doc_index.dimension,
                "delta_default": self.delta_default,
                "top_k_docs": self.top_k_docs,
            }
            doc_keys = self._doc_index.keys
            exp_keys = self._exp_index.keys
            (directory / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")
            (directory / "docs.json").write_text(
                json.dumps([vars(self.docs[k]) for k in doc_keys], indent=2, ensure_ascii=False),
                encoding="utf-8",
            )
            (directory / "experiences.json").write_text(
                json.dumps([vars(self.experiences[k]) for k in exp_keys], indent=2, ensure_ascii=False),
                encoding="utf-8",
            )
            np.savez(
                directory / "vectors.npz",
                docs=self._doc_index.export_rows(),
                experiences=self._exp_index.export_rows(),
            )

    @classmethod
    def load(cls, directory: str | Path, embedder=None) -> "KnowledgeBase":
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
        if embedder is None:
            if manifest["provider_id"].startswith("local-3gram-"):
                embedder = LocalHashEmbedder(manifest["dimension"])
            else:
                raise ValueError(
                    f"index built by provider {manifest['provider_id']!r}; pass a matching embedder"
                )
        if embedder.provider_id != manifest["provider_id"]:
            raise ValueError(
                f"index built by provider {manifest['provider_id']!r}, "
                f"refusing queries from {embedder.provider_id!r}"
            )
        kb = cls(
            embedder=embedder,
            top_k_docs=manifest.get("top_k_docs", DEFAULT_TOP_K_DOCS),
            delta_default=manifest.get("delta_default", 0.85),
        )
        vectors = np.load(directory / "vectors.npz")
        docs = json.loads((directory / "docs.json").read_text(encoding="utf-8"))
        for record, row in zip(docs, vectors["docs"]):
            entry = DocEntry(**record)
            kb.docs[entry.api_name] = entry
            kb._doc_index.upsert(entry.api_name, row, pre_normalized=True)
        experiences = json.loads((directory / "experiences.json").read_text(encoding="utf-8"))
        for record, row in zip(experiences, vectors["experiences"]):
            entry = ExperienceEntry(**record)
            kb.experiences[entry.problem_type] = entry
            kb._exp_index.upsert(entry.problem_type, row, pre_normalized=True)
        return kb
