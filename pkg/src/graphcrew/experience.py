"""Experience harvesting: solve the training set without an experience
base, score each surviving candidate by how many validation problems of
its type it helps answer, and keep the single best candidate per type.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .errors import SchemaError
from .knowledge import ExperienceEntry

log = logging.getLogger(__name__)

DEFAULT_N_EXP = 10


@dataclass(frozen=True)
class ProblemRecord:
    id: str
    question: str
    gold_answer: str
    problem_type: str

    def __post_init__(self):
        if not (self.question and self.gold_answer and self.problem_type):
            raise ValueError("question, gold_answer, and problem_type must be nonempty")


@dataclass(frozen=True)
class SolverOutput:
    answer: str
    thought: str = ""
    code: str = ""


class Solver(Protocol):
    def solve(self, record: ProblemRecord, experience: ExperienceEntry | None) -> SolverOutput: ...


@dataclass
class Candidate:
    entry: ExperienceEntry
    train_index: int


CandidatePool = dict[str, list[Candidate]]
UtilityMap = dict[tuple[str, int], int]  # (problem_type, pool position) -> utility


def load_records(path: str | Path) -> list[ProblemRecord]:
    """Read a JSONL dataset of {id, question, answer, type} records."""
    records = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except ValueError as exc:
                raise SchemaError(line_no, f"invalid JSON: {exc}") from exc
            missing = [k for k in ("question", "answer", "type") if not raw.get(k)]
            if missing:
                raise SchemaError(line_no, f"missing fields: {missing}")
            records.append(
                ProblemRecord(
                    id=str(raw.get("id", line_no)),
                    question=str(raw["question"]),
                    gold_answer=str(raw["answer"]),
                    problem_type=str(raw["type"]),
                )
            )
    return records


def _is_correct(answer: str, gold: str) -> bool:
    from .bench import exact_match

    return exact_match(answer, gold) == 1


def collect_candidates(train: list[ProblemRecord], solver: Solver, n_exp: int = DEFAULT_N_EXP) -> CandidatePool:
    """First pass over the training set: run the solver with no experience
    and keep correct solutions as candidates, at most *n_exp* per type.

    The cap is checked before each solve, so records past a full pool are
    skipped without spending a solver run. Solver errors count as wrong.
    """
    pools: CandidatePool = {}
    for index, record in enumerate(train):
        pool = pools.setdefault(record.problem_type, [])
        if len(pool) >= n_exp:
            continue
        try:
            output = solver.solve(record, None)
        except Exception as exc:
            log.warning("solver failed on train record %s: %s", record.id, exc)
            continue
        if not _is_correct(output.answer, record.gold_answer):
            continue
        if not output.code:
            # an experience entry is only useful with runnable code attached
            log.info("train record %s solved without code; not kept as a candidate", record.id)
            continue
        pool.append(
            Candidate(
                entry=ExperienceEntry(
                    question=record.question,
                    answer=record.gold_answer,
                    thought=output.thought,
                    code=output.code,
                    problem_type=record.problem_type,
                ),
                train_index=index,
            )
        )
    return pools


def score_utilities(
    valid: list[ProblemRecord],
    pools: CandidatePool,
    solver: Solver,
    parallelism: int = 1,
) -> UtilityMap:
    """Second pass: each candidate is injected as the retrieved experience
    for every validation record of its type; its utility is the count of
    exact-match answers."""
    utilities: UtilityMap = {
        (ptype, position): 0 for ptype, pool in pools.items() for position in range(len(pool))
    }
    tasks = [
        (record, record.problem_type, position)
        for record in valid
        for position in range(len(pools.get(record.problem_type, [])))
    ]

    def evaluate(task) -> tuple[tuple[str, int], bool]:
        record, ptype, position = task
        candidate = pools[ptype][position]
        try:
            output = solver.solve(record, candidate.entry)
        except Exception as exc:
            log.warning("solver failed on validation record %s: %s", record.id, exc)
            return (ptype, position), False
        return (ptype, position), _is_correct(output.answer, record.gold_answer)

    if parallelism > 1 and tasks:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(evaluate, tasks))
    else:
        results = [evaluate(task) for task in tasks]
    for key, correct in results:
        if correct:
            utilities[key] += 1
    return utilities


def select_best(pools: CandidatePool, utilities: UtilityMap) -> dict[str, ExperienceEntry]:
    """Argmax utility per type; ties go to the candidate that appeared
    earliest in the training set."""
    selected: dict[str, ExperienceEntry] = {}
    for ptype, pool in pools.items():
        if not pool:
            continue
        best_position = None
        best_utility = -1
        for position, candidate in enumerate(pool):
            utility = utilities.get((ptype, position), 0)
            if utility > best_utility:
                best_utility = utility
                best_position = position
        selected[ptype] = pool[best_position].entry
    return selected


@dataclass
class CollectionResult:
    pools: CandidatePool
    utilities: UtilityMap
    selected: dict[str, ExperienceEntry] = field(default_factory=dict)


def run_collection(
    train: list[ProblemRecord],
    valid: list[ProblemRecord],
    solver: Solver,
    n_exp: int = DEFAULT_N_EXP,
    parallelism: int = 1,
) -> CollectionResult:
    pools = collect_candidates(train, solver, n_exp)
    utilities = score_utilities(valid, pools, solver, parallelism)
    selected = select_best(pools, utilities)
    return CollectionResult(pools, utilities, selected)


def write_experience_file(selected: dict[str, ExperienceEntry], path: str | Path) -> None:
    """Write the selected experiences in the JSON layout the knowledge
    base ingests."""
    records = [vars(selected[ptype]) for ptype in sorted(selected)]
    Path(path).write_text(json.dumps(records, indent=2, ensure_ascii=False), encoding="utf-8")
