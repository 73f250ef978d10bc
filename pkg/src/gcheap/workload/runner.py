"""Execute workload scripts and produce a statistics report."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Annotated, Any

from gcheap.collector import Mode
from gcheap.handle import ManagedRef
from gcheap.heap import Heap, HeapConfig
from gcheap.testkit.oracle import ShadowGraph, reachable
from gcheap.tracing import NO_TRACE, traceable
from gcheap.workload.script import Directive, WorkloadScript

SCHEMA = "gcheap.stats-report"
SCHEMA_VERSION = 1
DURATION_FIELDS = ("last_mark_duration", "last_sweep_duration", "mark_seconds", "sweep_seconds")


@traceable
@dataclass(eq=False)
class ScriptNode:
    name: str
    children: list[ManagedRef]
    sink: Annotated[list, NO_TRACE]

    def __finalize__(self) -> None:
        self.sink.append(self.name)


@dataclass
class StatsReport:
    kind: str
    config: dict[str, Any]
    seed: int | None = None
    collections: list[dict[str, Any]] = field(default_factory=list)
    final: dict[str, Any] = field(default_factory=dict)
    assertions: list[dict[str, Any]] = field(default_factory=list)
    verification: dict[str, Any] | None = None
    scenarios: list[dict[str, Any]] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": SCHEMA,
            "version": SCHEMA_VERSION,
            "kind": self.kind,
            "status": "ok" if self.ok else "failed",
            "config": self.config,
            "seed": self.seed,
            "collections": self.collections,
            "final": self.final,
            "assertions": self.assertions,
            "verification": self.verification,
            "scenarios": self.scenarios,
            "failures": self.failures,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def strip_durations(document: Any) -> Any:
    """Copy of a report document with every timing field removed."""
    if isinstance(document, dict):
        return {k: strip_durations(v) for k, v in document.items() if k not in DURATION_FIELDS}
    if isinstance(document, list):
        return [strip_durations(v) for v in document]
    return document


def config_dict(config: HeapConfig) -> dict[str, Any]:
    return {
        "mode": Mode(config.mode).value,
        "threshold_bytes": config.threshold_bytes,
        "growth_factor": config.growth_factor,
    }


def final_snapshot(heap: Heap) -> dict[str, Any]:
    stats = heap.report()
    state = heap.state
    snapshot = stats.as_dict()
    snapshot.update(
        records_allocated=state.records_allocated,
        records_live=len(state.records),
        bytes_allocated=state.bytes_allocated,
        bytes_live=state.bytes_live,
        threshold_bytes=state.threshold_bytes,
    )
    return snapshot


def collection_entries(heap: Heap, label=lambda address: address) -> list[dict[str, Any]]:
    entries = []
    for event in heap.history:
        delta = event.delta
        entries.append(
            {
                "index": event.index,
                "trigger": event.trigger,
                "records_reclaimed": delta.records_reclaimed,
                "bytes_reclaimed": delta.bytes_reclaimed,
                "finalizers_run": delta.finalizers_run,
                "records_live_after": delta.records_live_after_last,
                "reclaimed": [label(a) for a in event.reclaimed],
                "mark_seconds": delta.last_mark_duration,
                "sweep_seconds": delta.last_sweep_duration,
            }
        )
    return entries


class _ScriptRun:
    def __init__(self, config: HeapConfig, verify: bool) -> None:
        self.heap = config.make_heap()
        self.verify = verify
        self.never = Mode(config.mode) is Mode.NEVER_COLLECT
        self.handles: dict[str, ManagedRef] = {}
        self.record_of: dict[str, str] = {}  # handle name -> name of the alloc that made it
        self.address_of: dict[str, int] = {}
        self.name_at: dict[int, str] = {}
        self.ids: dict[str, int] = {}
        self.shadow = ShadowGraph()
        self.log: list[str] = []
        self.seen = 0
        self.assertions: list[dict[str, Any]] = []
        self.failures: list[str] = []
        self.violations: list[str] = []
        self.checked = 0

    def check_collection(self, directive: Directive, trigger: str) -> None:
        reclaimed = self.log[self.seen :]
        self.seen = len(self.log)
        got = {self.ids[name] for name in reclaimed}
        if self.verify:
            self.checked += 1
            live = reachable(self.shadow)
            expected = set() if self.never else self.shadow.nodes - live
            if got & live:
                self.violations.append(
                    f"line {directive.line}: {trigger} collection reclaimed reachable records"
                )
            elif got != expected:
                self.violations.append(
                    f"line {directive.line}: {trigger} collection disagrees with the oracle"
                )
        self.shadow.remove(got)

    def execute(self, d: Directive) -> None:
        heap, op, args = self.heap, d.op, d.args
        if op == "alloc":
            name, size = args[0], int(args[1])
            before = heap.state.stats.collections_run
            handle = heap.alloc(ScriptNode(name, [], self.log), size=size)
            if heap.state.stats.collections_run != before:
                self.check_collection(d, "threshold")
            self.ids[name] = len(self.ids)
            self.shadow.alloc(self.ids[name])
            self.handles[name] = handle
            self.record_of[name] = name
            self.address_of[name] = handle.address
            self.name_at[handle.address] = name
        elif op == "copy":
            src, dst = args
            self.handles[dst] = self.handles[src].copy()
            self.record_of[dst] = self.record_of[src]
            self.shadow.copy(self.ids[self.record_of[src]])
        elif op == "drop":
            self.handles.pop(args[0]).drop()
            self.shadow.drop(self.ids[self.record_of[args[0]]])
        elif op == "link":
            parent, child = (self.handles[n] for n in args)
            parent.deref_mut().children.append(child.copy())
            self.shadow.link(*(self.ids[self.record_of[n]] for n in args))
        elif op == "unlink":
            parent, child = (self.handles[n] for n in args)
            children = parent.deref_mut().children
            if child not in children:
                self.failures.append(f"line {d.line}: {d}: {args[1]} is not a child of {args[0]}")
                return
            children.remove(child)
            p, c = (self.ids[self.record_of[n]] for n in args)
            self.shadow.unlink(p, self.shadow.edges[p].index(c))
        elif op == "collect":
            heap.collect()
            if not self.never:
                self.check_collection(d, "explicit")
        elif op in ("assert_live", "assert_reclaimed"):
            self.check_assertion(d)

    def check_assertion(self, d: Directive) -> None:
        record = self.record_of[d.args[0]]
        live = self.heap.is_live(self.address_of[record])
        want_live = d.op == "assert_live"
        entry = {"line": d.line, "directive": str(d), "live": live}
        if self.verify:
            entry["oracle_live"] = self.ids[record] in self.shadow.nodes
        if live == want_live:
            entry["outcome"] = "pass"
        elif self.never and not want_live:
            # nothing is ever reclaimed in this mode; documented, not a failure
            entry["outcome"] = "expected-under-never_collect"
        else:
            entry["outcome"] = "fail"
            self.failures.append(f"line {d.line}: {d} failed")
        self.assertions.append(entry)

    def audit_roots(self) -> None:
        counts = self.heap.root_counts()
        names = list(self.ids)  # ids are assigned in insertion order
        census = {self.address_of[names[i]]: c for i, c in self.shadow.root_census().items()}
        if counts != census:
            self.violations.append(f"root counts {counts} disagree with census {census}")


def run_workload(
    script: WorkloadScript,
    config: HeapConfig = HeapConfig(),
    *,
    verify: bool = False,
    seed: int | None = None,
) -> StatsReport:
    """Execute ``script`` against a fresh heap.

    With ``verify`` every collection is compared with the reachability
    oracle and the root counts are audited at the end.
    """
    run = _ScriptRun(config, verify)
    for directive in script:
        run.execute(directive)
    if verify:
        run.audit_roots()
        run.failures.extend(run.violations)
    report = StatsReport(kind="run", config=config_dict(config), seed=seed)
    report.collections = collection_entries(run.heap, lambda a: run.name_at.get(a, a))
    report.final = final_snapshot(run.heap)
    report.assertions = run.assertions
    if verify:
        report.verification = {
            "collections_checked": run.checked,
            "violations": run.violations,
        }
    report.failures = run.failures
    run.heap.close()
    return report
