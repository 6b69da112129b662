import json
import math
import sys

import numpy as np
import pytest

from graphcrew.gateway import MockBackend, MockEntry, TemplateLibrary

# The running example used across the suite: a 7-node undirected graph and
# the question of whether it has a path visiting every node exactly once.
HAMILTON_EDGES = {(0, 3), (0, 1), (1, 6), (2, 4), (3, 5), (3, 6), (4, 5)}
HAMILTON_QUESTION = (
    "In an undirected graph, the nodes are 0 to 6 and the edges are: "
    "(0,3), (0,1), (1,6), (2,4), (3,5), (3,6), (4,5). "
    "Is there a path in this graph that visits every node exactly once? "
    "If yes, give the path. Output format such as: Yes. The path can be: 1,4,8."
)
HAMILTON_INPUT_DATA = (
    "Nodes: [0, 1, 2, 3, 4, 5, 6], "
    "Edges: [0, 3], [0, 1], [1, 6], [2, 4], [3, 5], [3, 6], [4, 5]"
)
HAMILTON_OUTPUT_FORMAT = "Yes. The path can be: 1,4,8."
HAMILTON_ANSWER = "Yes. The path can be: 0, 1, 6, 3, 5, 4, 2."


def question_reply(
    refined="Is there a path in this graph that visits every node exactly once?",
    graph_type="undirected",
    input_data=HAMILTON_INPUT_DATA,
    output_format=HAMILTON_OUTPUT_FORMAT,
):
    """A question-agent JSON reply in the keys the prompt asks for."""
    fields = {
        "Reformatted_Problem": refined,
        "Graph_Type": graph_type,
        "Input_Data": input_data,
        "Output_Format": output_format,
    }
    return json.dumps({k: v for k, v in fields.items() if v is not None})


def answer_reply(need_adjustment, output):
    return json.dumps({"need_adjustment": need_adjustment, "output": output})


def coding_reply(code, prose="Here is the solution."):
    return f"{prose}\n```python\n{code}\n```"


def mock_backend(*entries):
    """Build a MockBackend from (match, response[, in_tokens, out_tokens]) tuples."""
    built = []
    for entry in entries:
        match, response = entry[0], entry[1]
        tokens = entry[2:] if len(entry) > 2 else (None, None)
        built.append(MockEntry(match, response, tokens[0], tokens[1]))
    return MockBackend(built)


class FakeEmbedder:
    """Test embedder returning preset vectors per exact text."""

    def __init__(self, mapping, dimension=2):
        self.mapping = dict(mapping)
        self.dimension = dimension
        self.provider_id = f"fake-{dimension}"

    def embed(self, text):
        if text not in self.mapping:
            raise KeyError(f"no fake vector for {text!r}")
        return np.asarray(self.mapping[text], dtype=np.float64)


def is_valid_hamiltonian_path(path, edges=HAMILTON_EDGES, nodes=frozenset(range(7))):
    """Independent checker: the path visits each node once and every
    consecutive pair is an edge."""
    if set(path) != set(nodes) or len(path) != len(nodes):
        return False
    for a, b in zip(path, path[1:]):
        if (a, b) not in edges and (b, a) not in edges:
            return False
    return True


def boundary_vector(score):
    """A 2-D vector whose post-normalization dot product with (1, 0) is
    exactly the float *score*: its norm is adjusted to be exactly 1.0 so
    normalization cannot perturb the first component."""
    b = math.sqrt(1.0 - score * score)
    for _ in range(64):
        v = np.array([score, b])
        if np.linalg.norm(v) == 1.0 and float(np.dot(v, np.array([1.0, 0.0]))) == score:
            return v
        b = math.nextafter(b, 2.0)
    raise RuntimeError("could not construct an exact boundary vector")


@pytest.fixture(scope="session")
def templates():
    return TemplateLibrary.load()


def pytest_runtest_makereport(item, call):
    # one visible pass/fail line per acceptance criterion
    if call.when == "call" and item.fspath.basename == "test_acceptance.py":
        status = "PASS" if call.excinfo is None else "FAIL"
        print(f"[acceptance] {item.name}: {status}", file=sys.__stderr__)
