"""Build an experience base from a toy train/validation split.

The solver here is a stand-in truth table so the collection mechanics are
easy to watch: candidates are kept only when the bare solver answers a
training item correctly, utilities count validation wins with each
candidate injected, and the best candidate per problem type survives.
In production the solver is PipelineSolver wrapping a real Orchestrator.
"""

import tempfile
from pathlib import Path

from graphcrew import KnowledgeBase, ProblemRecord, SolverOutput, run_collection
from graphcrew.experience import write_experience_file

TRAIN = [
    ProblemRecord("t1", "Does graph A contain a cycle?", "Yes", "cycle"),
    ProblemRecord("t2", "Does graph B contain a cycle?", "No", "cycle"),
    ProblemRecord("t3", "Does graph C contain a cycle?", "Yes", "cycle"),
    ProblemRecord("t4", "Shortest path length 0 to 3 in graph D?", "4", "shortest"),
]

VALID = [
    ProblemRecord("v1", "Does graph E contain a cycle?", "Yes", "cycle"),
    ProblemRecord("v2", "Does graph F contain a cycle?", "No", "cycle"),
    ProblemRecord("v3", "Does graph G contain a cycle?", "Yes", "cycle"),
    ProblemRecord("v4", "Shortest path length 2 to 5 in graph H?", "7", "shortest"),
]

# which (validation item, candidate source) pairs come out correct
AUGMENTED_WINS = {("v1", "t1"), ("v2", "t1"), ("v3", "t3"), ("v4", "t4"), ("v1", "t3")}
BARE_WINS = {"t1", "t3", "t4"}


class TableSolver:
    def solve(self, record, experience):
        if experience is None:
            correct = record.id in BARE_WINS
        else:
            source = experience.code.split()[-1]  # the toy code names its source
            correct = (record.id, source) in AUGMENTED_WINS
        answer = record.gold_answer if correct else "wrong"
        return SolverOutput(answer=answer, thought="toy", code=f"# solution from {record.id}")


def main():
    result = run_collection(TRAIN, VALID, TableSolver(), n_exp=10)

    print("candidate pools:")
    for ptype, pool in result.pools.items():
        sources = [candidate.entry.code.split()[-1] for candidate in pool]
        print(f"  {ptype:<9} {sources}")

    print("utilities:")
    for (ptype, position), utility in sorted(result.utilities.items()):
        print(f"  {ptype}[{position}] -> {utility}")

    print("selected per type:")
    for ptype, entry in sorted(result.selected.items()):
        print(f"  {ptype:<9} from {entry.code.split()[-1]} (answer {entry.answer!r})")

    # the selected entries feed the knowledge base the pipeline retrieves from
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "experiences.json"
        write_experience_file(result.selected, path)
        kb = KnowledgeBase()
        kb.load_experiences(path)
        hit = kb.search("Does graph Z contain a cycle?", "undirected", delta=0.2)
        print(f"retrieval after ingest: kind={hit.kind}, type={hit.entries[0][0].problem_type}")


if __name__ == "__main__":
    main()
