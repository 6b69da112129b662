"""Score the shipped 10-item synthetic suite with a fully scripted mock.

Every agent reply and every execution outcome is scripted per item, so the
run is deterministic: the report always shows the same per-category means
and the same token totals. This is the same fixture shape the acceptance
tests use to pin determinism.
"""

import json
import tempfile
from importlib import resources
from pathlib import Path

from graphcrew import MockBackend, Orchestrator, PipelineConfig, StubExecutor, load_dataset, run_benchmark
from graphcrew.execution import ok
from graphcrew.gateway import MockEntry


def scripted_fixture(items):
    entries = []
    rules = []
    for item in items:
        if item.task_category == "gnn":
            stdout = "training done\n" + json.dumps(item.required_params) + "\n"
        else:
            stdout = item.gold_answer + "\n"
        reply = json.dumps(
            {
                "Reformatted_Problem": f"solve {item.id}",
                "Graph_Type": "undirected",
                "Input_Data": f"data {item.id}",
                "Output_Format": "None",
            }
        )
        entries.append(MockEntry(f"Here is the task: {item.question[:60]}", reply, 100, 20))
        entries.append(
            MockEntry(
                f"Reformatted_Problem: solve {item.id},",
                f"```python\nprint('RUN-{item.id}')\n```",
                200,
                50,
            )
        )
        rules.append((f"RUN-{item.id}", ok(stdout)))
    return MockBackend(entries), StubExecutor(rules=rules)


def main():
    dataset_path = resources.files("graphcrew") / "data" / "synthetic10.jsonl"
    items = load_dataset(str(dataset_path))
    backend, executor = scripted_fixture(items)
    orchestrator = Orchestrator(PipelineConfig(), backend, executor=executor)

    with tempfile.TemporaryDirectory() as tmp:
        report = run_benchmark(items, orchestrator, parallelism=4, out_dir=tmp)
        print(report.to_text_table())
        print(f"per-item files: {len(list((Path(tmp) / 'items').glob('*.json')))}")
        print(f"report files:   report.json, report.txt under {tmp}")


if __name__ == "__main__":
    main()
