"""Command-line entry points: solve, solve-batch, collect, bench, report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bench as bench_mod
from .experience import load_records, run_collection, write_experience_file
from .normalize import RawQuestion
from .pipeline import Orchestrator, PipelineConfig, PipelineSolver, write_trace

log = logging.getLogger(__name__)


def _load_config(path: str | None) -> PipelineConfig:
    return PipelineConfig.from_file(path) if path else PipelineConfig()


def _read_question_file(path: str) -> RawQuestion:
    text = Path(path).read_text(encoding="utf-8").strip()
    if text.startswith("{"):
        try:
            raw = json.loads(text)
            return RawQuestion(str(raw["question"]), item_id=str(raw.get("id")) if raw.get("id") else None)
        except (ValueError, KeyError):
            pass
    return RawQuestion(text)


def cmd_solve(args) -> int:
    config = _load_config(args.config)
    orchestrator = Orchestrator.from_config(config)
    answer, trace = orchestrator.solve(_read_question_file(args.question_file))
    path = write_trace(trace, args.out)
    print(answer.text)
    log.info("status=%s trace=%s", answer.status, path)
    return 0


def cmd_solve_batch(args) -> int:
    config = _load_config(args.config)
    orchestrator = Orchestrator.from_config(config)
    items = []
    with open(args.dataset, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle):
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            items.append(RawQuestion(str(raw["question"]), item_id=str(raw.get("id", line_no))))
    results = orchestrator.solve_batch(items, parallelism=args.parallel)
    for _, trace in results:
        write_trace(trace, args.out)
    solved = sum(1 for answer, _ in results if answer.status != "failed")
    log.info("%d/%d items solved", solved, len(results))
    return 0


def cmd_collect(args) -> int:
    config = _load_config(args.config)
    orchestrator = Orchestrator.from_config(config)
    solver = PipelineSolver(orchestrator)
    train = load_records(args.train)
    valid = load_records(args.valid)
    result = run_collection(train, valid, solver, n_exp=args.n_exp or config.n_exp, parallelism=args.parallel)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_experience_file(result.selected, out / "experiences.json")
    utilities = {
        f"{ptype}[{position}]": utility for (ptype, position), utility in sorted(result.utilities.items())
    }
    (out / "utilities.json").write_text(json.dumps(utilities, indent=2), encoding="utf-8")
    log.info("kept %d experiences across %d types", len(result.selected), len(result.pools))
    return 0


def cmd_bench(args) -> int:
    config = _load_config(args.config)
    orchestrator = Orchestrator.from_config(config)
    dataset = bench_mod.load_dataset(args.dataset)
    report = bench_mod.run_benchmark(dataset, orchestrator, parallelism=args.parallel, out_dir=args.out)
    print(report.to_text_table())
    return 0


def cmd_report(args) -> int:
    report = bench_mod.report_from_run_dir(args.runs)
    bench_mod.write_report(report, args.runs)
    print(report.to_text_table())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphcrew", description="Multi-agent graph reasoning pipeline")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one question")
    p.add_argument("--question-file", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("solve-batch", help="solve a JSONL dataset of questions")
    p.add_argument("--dataset", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--parallel", type=int, default=1)
    p.set_defaults(func=cmd_solve_batch)

    p = sub.add_parser("collect", help="build the experience base from train/validation sets")
    p.add_argument("--train", required=True)
    p.add_argument("--valid", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-exp", type=int, default=None)
    p.add_argument("--config")
    p.add_argument("--parallel", type=int, default=1)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("bench", help="run a benchmark dataset and write a report")
    p.add_argument("--dataset", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--parallel", type=int, default=1)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="regenerate a report from persisted run files")
    p.add_argument("--runs", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
