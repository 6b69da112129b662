"""Walk one question through the whole pipeline, fully offline.

The chat backend is a deterministic script and the executor is the
in-memory stub, so this runs anywhere and always produces the same trace.
Swap in OpenAIBackend / SandboxExecutor for a live deployment.
"""

import json

from graphcrew import (
    ExperienceEntry,
    KnowledgeBase,
    MockBackend,
    Orchestrator,
    PipelineConfig,
    RawQuestion,
    StubExecutor,
)
from graphcrew.execution import ok
from graphcrew.gateway import MockEntry

QUESTION = (
    "In an undirected graph, the nodes are 0 to 6 and the edges are: "
    "(0,3), (0,1), (1,6), (2,4), (3,5), (3,6), (4,5). "
    "Is there a path in this graph that visits every node exactly once? "
    "If yes, give the path. Output format such as: Yes. The path can be: 1,4,8."
)

QUESTION_AGENT_REPLY = json.dumps(
    {
        "Reformatted_Problem": "Is there a path in this graph that visits every node exactly once?",
        "Graph_Type": "undirected",
        "Input_Data": "Nodes: [0..6], Edges: [0,3], [0,1], [1,6], [2,4], [3,5], [3,6], [4,5]",
        "Output_Format": "Yes. The path can be: 1,4,8.",
    }
)

CODING_AGENT_REPLY = """The retrieved experience shows the standard search.

```python
import itertools

edges = {(0, 3), (0, 1), (1, 6), (2, 4), (3, 5), (3, 6), (4, 5)}

def connected(a, b):
    return (a, b) in edges or (b, a) in edges

for perm in itertools.permutations(range(7)):
    if all(connected(a, b) for a, b in zip(perm, perm[1:])):
        print(", ".join(str(n) for n in perm))
        break
else:
    print("No")
```
"""

FINAL = "Yes. The path can be: 0, 1, 6, 3, 5, 4, 2."


def main():
    backend = MockBackend(
        [
            MockEntry("requirement analyst", QUESTION_AGENT_REPLY, 120, 40),
            MockEntry("Based on the available search result", CODING_AGENT_REPLY, 300, 90),
            MockEntry(
                "reviewed): 0, 1, 6, 3, 5, 4, 2",
                json.dumps({"need_adjustment": True, "output": FINAL}),
                90,
                25,
            ),
            MockEntry("reviewed): Yes.", json.dumps({"need_adjustment": False, "output": FINAL}), 90, 10),
        ]
    )

    # a one-entry experience base: the search gate will hit it
    kb = KnowledgeBase()
    kb.add_experience(
        ExperienceEntry(
            question="Is there a path in this graph that visits every node exactly once?",
            answer="Yes. The path can be: 0, 1, 6, 5.",
            thought="Search over node orderings, pruning on missing edges.",
            code="def search_paths(graph, path): ...",
            problem_type="hamilton",
        )
    )

    # stub executor standing in for the sandbox runner
    executor = StubExecutor(default=ok("0, 1, 6, 3, 5, 4, 2\n"))

    orchestrator = Orchestrator(PipelineConfig(), backend, kb=kb, executor=executor)
    answer, trace = orchestrator.solve(RawQuestion(QUESTION, item_id="demo"))

    print(f"status:      {answer.status}")
    print(f"final text:  {answer.text}")
    print(f"retrieval:   {trace.retrieval_kind} (top score {trace.retrieval_scores[0][1]:.3f})")
    print(f"agent calls: {trace.agent_calls}")
    print(f"tokens:      {trace.usage['total']} ({trace.usage['input']} in / {trace.usage['output']} out)")
    print("stages:")
    for stage in trace.stages:
        print(f"  {stage.name:<10} calls={stage.calls}")


if __name__ == "__main__":
    main()
