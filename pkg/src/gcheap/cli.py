"""Command-line entry point.

Exit status: 0 on success, 1 when an assertion or verification fails,
2 on usage or parse errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from gcheap.collector import DEFAULT_GROWTH_FACTOR, DEFAULT_THRESHOLD_BYTES, Mode
from gcheap.heap import HeapConfig
from gcheap.testkit.driver import run_fuzz
from gcheap.workload.corpus import run_corpus
from gcheap.workload.runner import StatsReport, config_dict, run_workload
from gcheap.workload.script import ScriptError, load_script

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_heap_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--mode", choices=[m.value for m in Mode], default=Mode.NORMAL.value
    )
    parser.add_argument("--threshold-bytes", type=int, default=DEFAULT_THRESHOLD_BYTES)
    parser.add_argument("--growth-factor", type=float, default=DEFAULT_GROWTH_FACTOR)
    parser.add_argument("--stats-out", type=Path, help="write the JSON report here")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gcheap", description="Run mutator workloads on the managed heap.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="execute a workload script")
    run.add_argument("script", type=Path)
    _add_heap_options(run)
    run.add_argument("--verify", action="store_true", help="check every collection with the oracle")
    run.add_argument("--seed", type=int, default=None)

    corpus = sub.add_parser("corpus", help="run the turtle-campus scenarios in both modes")
    corpus.add_argument("--stats-out", type=Path)

    fuzz = sub.add_parser("fuzz", help="generate and replay a random workload")
    fuzz.add_argument("--seed", type=int, required=True)
    fuzz.add_argument("--steps", type=int, default=10_000)
    fuzz.add_argument("--nodes", type=int, default=50)
    fuzz.add_argument("--audits", type=int, default=10)
    fuzz.add_argument("--verify", action="store_true")
    _add_heap_options(fuzz)
    return parser


def _config(args: argparse.Namespace) -> HeapConfig:
    if args.threshold_bytes < 0:
        raise ValueError("--threshold-bytes must be non-negative")
    if args.growth_factor < 1.0:
        raise ValueError("--growth-factor must be at least 1.0")
    return HeapConfig(Mode(args.mode), args.threshold_bytes, args.growth_factor)


def _emit(report: StatsReport, path: Path | None) -> None:
    text = report.to_json()
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text, encoding="utf-8")


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        script = load_script(args.script)
    except ScriptError as exc:
        print(f"{args.script}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"gcheap: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = run_workload(script, _config(args), verify=args.verify, seed=args.seed)
    _emit(report, args.stats_out)
    for failure in report.failures:
        print(f"{args.script}: {failure}", file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_FAILED


def _cmd_corpus(args: argparse.Namespace) -> int:
    results = run_corpus()
    report = StatsReport(kind="corpus", config={"modes": [m.value for m in Mode]})
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        line = f"{status} {result.mode:<13} {result.name}"
        print(line + (f": {result.detail}" if result.detail else ""), file=sys.stderr)
        report.scenarios.append(result.as_dict())
        if not result.passed:
            report.failures.append(f"{result.mode}/{result.name}: {result.detail}")
    # the same observations must come out of both modes
    by_name: dict[str, list] = {}
    for result in results:
        by_name.setdefault(result.name, []).append(result.observations)
    for name, logs in by_name.items():
        if any(log != logs[0] for log in logs):
            report.failures.append(f"{name}: observations differ between modes")
    if args.stats_out is not None:
        _emit(report, args.stats_out)
    return EXIT_OK if report.ok else EXIT_FAILED


def _cmd_fuzz(args: argparse.Namespace) -> int:
    if args.steps < 0 or args.nodes < 0:
        raise ValueError("--steps and --nodes must be non-negative")
    config = _config(args)
    result = run_fuzz(
        args.seed, args.steps, args.nodes, verify=args.verify, config=config, audits=args.audits
    )
    report = StatsReport(kind="fuzz", config=config_dict(config), seed=args.seed)
    summary = result.as_dict()
    report.final = summary.pop("stats")
    report.verification = summary if args.verify else None
    report.failures = summary["violations"]
    _emit(report, args.stats_out)
    for failure in report.failures:
        print(failure, file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_FAILED


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": _cmd_run, "corpus": _cmd_corpus, "fuzz": _cmd_fuzz}
    try:
        return handlers[args.command](args)
    except ValueError as exc:
        print(f"gcheap: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
