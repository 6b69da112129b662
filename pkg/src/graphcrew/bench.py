"""Benchmark harness: dataset loading, the two scoring rules, and report
assembly with per-category and per-output-format breakdowns plus token
accounting.

Scoring is deliberately strict: predictions match gold answers after
whitespace trimming only, with no case folding. GNN-deployment items get
partial credit per correctly realized hyper-parameter, read from the JSON
configuration line the generated script is required to print; a script
that never ran scores zero.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SchemaError
from .normalize import RawQuestion
from .pipeline import FinalAnswer, Orchestrator, PipelineTrace

log = logging.getLogger(__name__)

TASK_CATEGORIES = ("basic", "macro", "micro", "gnn")
OUTPUT_CLASSES = ("yes_no", "digits", "list_set", "others")

GNN_PRINT_INSTRUCTION = (
    "After the model is set up, print the effective configuration as a final line "
    "of JSON with the requested hyper-parameter names as keys."
)


@dataclass(frozen=True)
class BenchmarkItem:
    id: str
    question: str
    gold_answer: str
    problem_type: str
    task_category: str
    output_class: str
    required_params: dict | None = None


@dataclass
class EvalRecord:
    item_id: str
    prediction: str
    score: float
    status: str
    tokens_used: int
    task_category: str
    output_class: str


@dataclass(frozen=True)
class GnnSpecCheck:
    required_params: dict
    emitted_params: dict
    ran_ok: bool

    def __post_init__(self):
        if len(self.required_params) < 1:
            raise ValueError("a GNN check needs at least one required parameter")


# ---------------------------------------------------------------------------
# Dataset loading
# ---------------------------------------------------------------------------


def _normalize_group(value, vocabulary: tuple[str, ...], line_no: int, label: str) -> str:
    text = str(value).strip().lower() if value is not None else ""
    if text in vocabulary:
        return text
    log.warning("line %d: unknown %s %r, defaulting to 'others'", line_no, label, value)
    return "others"


def load_dataset(path: str | Path) -> list[BenchmarkItem]:
    """Read a JSONL benchmark file of
    {id, question, answer, type, category, output_class, required_params?}."""
    items = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except ValueError as exc:
                raise SchemaError(line_no, f"invalid JSON: {exc}") from exc
            missing = [k for k in ("id", "question", "answer", "type") if not raw.get(k)]
            if missing:
                raise SchemaError(line_no, f"missing fields: {missing}")
            required = raw.get("required_params")
            if required is not None and not isinstance(required, dict):
                raise SchemaError(line_no, "required_params must be an object")
            items.append(
                BenchmarkItem(
                    id=str(raw["id"]),
                    question=str(raw["question"]),
                    gold_answer=str(raw["answer"]),
                    problem_type=str(raw["type"]),
                    task_category=_normalize_group(raw.get("category"), TASK_CATEGORIES, line_no, "category"),
                    output_class=_normalize_group(raw.get("output_class"), OUTPUT_CLASSES, line_no, "output_class"),
                    required_params=required,
                )
            )
    return items


# ---------------------------------------------------------------------------
# Scoring rules
# ---------------------------------------------------------------------------


def exact_match(prediction: str, gold: str) -> int:
    """Binary score: trimmed strings must be identical, case included."""
    return 1 if prediction.strip() == gold.strip() else 0


def _coerce_param(value):
    if isinstance(value, str):
        text = value.strip()
        try:
            return float(text)
        except ValueError:
            pass
        try:
            parsed = json.loads(text)
        except ValueError:
            return text
        if isinstance(parsed, (list, int, float, bool)):
            return _coerce_param(parsed)
        return text
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, list):
        return [_coerce_param(item) for item in value]
    return value


def _params_equal(expected, emitted) -> bool:
    left = _coerce_param(expected)
    right = _coerce_param(emitted)
    if isinstance(left, list) or isinstance(right, list):
        if not (isinstance(left, list) and isinstance(right, list)) or len(left) != len(right):
            return False
        return all(_params_equal(a, b) for a, b in zip(left, right))
    return left == right


def score_gnn(check: GnnSpecCheck) -> float:
    """Fraction of required hyper-parameters the script realized; zero
    whenever the script failed to run. Numeric values compare after
    parsing and lists compare order-sensitively."""
    if not check.ran_ok:
        return 0.0
    total = len(check.required_params)
    matched = sum(
        1
        for name, expected in check.required_params.items()
        if name in check.emitted_params and _params_equal(expected, check.emitted_params[name])
    )
    return matched / total


def _last_json_line(text: str) -> dict | None:
    for line in reversed(text.splitlines()):
        line = line.strip()
        if not line.startswith("{"):
            continue
        try:
            parsed = json.loads(line)
        except ValueError:
            continue
        if isinstance(parsed, dict):
            return parsed
    return None


def gnn_check_from_trace(item: BenchmarkItem, trace: PipelineTrace) -> GnnSpecCheck:
    """Build the parameter check from a pipeline trace: the run counts only
    if code solved the item, and the emitted configuration is the last JSON
    line of the successful trial's output."""
    ran_ok = False
    emitted: dict = {}
    if trace.status == "solved_by_code":
        for attempt in trace.attempts:
            if attempt.error is None and attempt.result:
                emitted = _last_json_line(attempt.result) or {}
                ran_ok = True
                break
    return GnnSpecCheck(required_params=item.required_params or {}, emitted_params=emitted, ran_ok=ran_ok)


def score_item(item: BenchmarkItem, answer: FinalAnswer, trace: PipelineTrace) -> float:
    if item.task_category == "gnn" and item.required_params:
        return score_gnn(gnn_check_from_trace(item, trace))
    return float(exact_match(answer.text, item.gold_answer))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class Report:
    overall: float
    n_items: int
    per_category: dict[str, dict]
    per_output_class: dict[str, dict]
    total_tokens: int
    mean_tokens: float
    records: list[EvalRecord] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "overall": self.overall,
            "n_items": self.n_items,
            "per_category": self.per_category,
            "per_output_class": self.per_output_class,
            "tokens": {"total": self.total_tokens, "mean": self.mean_tokens},
            "items": [
                {
                    "id": r.item_id,
                    "prediction": r.prediction,
                    "score": r.score,
                    "status": r.status,
                    "tokens_used": r.tokens_used,
                    "category": r.task_category,
                    "output_class": r.output_class,
                }
                for r in self.records
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True, ensure_ascii=False)

    def to_text_table(self) -> str:
        rows = [("group", "n", "mean score")]
        rows.append(("overall", str(self.n_items), f"{self.overall:.4f}"))
        for name, stats in sorted(self.per_category.items()):
            rows.append((f"category:{name}", str(stats["n"]), f"{stats['mean']:.4f}"))
        for name, stats in sorted(self.per_output_class.items()):
            rows.append((f"output:{name}", str(stats["n"]), f"{stats['mean']:.4f}"))
        widths = [max(len(row[col]) for row in rows) for col in range(3)]
        lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip() for row in rows]
        lines.append("")
        lines.append(f"tokens: total={self.total_tokens} mean={self.mean_tokens:.2f}")
        return "\n".join(lines) + "\n"


def _group_means(records: list[EvalRecord], key) -> dict[str, dict]:
    groups: dict[str, list[float]] = {}
    for record in records:
        groups.setdefault(key(record), []).append(record.score)
    return {
        name: {"n": len(scores), "mean": sum(scores) / len(scores)} for name, scores in groups.items()
    }


def build_report(records: list[EvalRecord]) -> Report:
    n = len(records)
    total_tokens = sum(r.tokens_used for r in records)
    return Report(
        overall=sum(r.score for r in records) / n if n else 0.0,
        n_items=n,
        per_category=_group_means(records, lambda r: r.task_category),
        per_output_class=_group_means(records, lambda r: r.output_class),
        total_tokens=total_tokens,
        mean_tokens=total_tokens / n if n else 0.0,
        records=sorted(records, key=lambda r: r.item_id),
    )


def run_benchmark(
    dataset: list[BenchmarkItem],
    orchestrator: Orchestrator,
    parallelism: int = 1,
    out_dir: str | Path | None = None,
) -> Report:
    """Solve every item, score it with the rule its category selects, and
    assemble the report; optionally persist per-item traces and both report
    renderings under *out_dir*."""
    questions = []
    for item in dataset:
        text = item.question
        if item.task_category == "gnn":
            text = f"{text}\n{GNN_PRINT_INSTRUCTION}"
        questions.append(RawQuestion(text, item_id=item.id))

    results = orchestrator.solve_batch(questions, parallelism=parallelism)
    records = []
    for item, (answer, trace) in zip(dataset, results):
        records.append(
            EvalRecord(
                item_id=item.id,
                prediction=answer.text,
                score=score_item(item, answer, trace),
                status=answer.status,
                tokens_used=trace.usage.get("total", 0),
                task_category=item.task_category,
                output_class=item.output_class,
            )
        )
    report = build_report(records)

    if out_dir is not None:
        out_dir = Path(out_dir)
        items_dir = out_dir / "items"
        items_dir.mkdir(parents=True, exist_ok=True)
        for item, record, (answer, trace) in zip(dataset, records, results):
            payload = {
                "eval": {
                    "id": record.item_id,
                    "prediction": record.prediction,
                    "gold": item.gold_answer,
                    "score": record.score,
                    "status": record.status,
                    "tokens_used": record.tokens_used,
                    "category": record.task_category,
                    "output_class": record.output_class,
                },
                "trace": trace.to_json_dict(),
            }
            (items_dir / f"{item.id}.json").write_text(
                json.dumps(payload, indent=2, ensure_ascii=False), encoding="utf-8"
            )
        write_report(report, out_dir)
    return report


def write_report(report: Report, out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out_dir / "report.txt").write_text(report.to_text_table(), encoding="utf-8")


def report_from_run_dir(runs_dir: str | Path) -> Report:
    """Rebuild a report from the per-item files a previous run persisted."""
    items_dir = Path(runs_dir) / "items"
    records = []
    for path in sorted(items_dir.glob("*.json")):
        payload = json.loads(path.read_text(encoding="utf-8"))
        info = payload["eval"]
        records.append(
            EvalRecord(
                item_id=info["id"],
                prediction=info["prediction"],
                score=info["score"],
                status=info["status"],
                tokens_used=info["tokens_used"],
                task_category=info["category"],
                output_class=info["output_class"],
            )
        )
    return build_report(records)
