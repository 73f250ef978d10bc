"""Replay workloads against a real heap while mirroring them in a shadow graph."""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Annotated, Iterable

from gcheap.collector import CollectionStats, Mode
from gcheap.handle import ManagedRef
from gcheap.heap import Heap, HeapConfig
from gcheap.testkit.generator import Event, generate_workload
from gcheap.testkit.oracle import ShadowGraph, has_cycle, reachable
from gcheap.tracing import NO_TRACE, traceable


@traceable
@dataclass(eq=False)
class FuzzNode:
    ident: int
    children: list[ManagedRef]
    sink: Annotated[list, NO_TRACE]

    def __finalize__(self) -> None:
        self.sink.append(self.ident)


@dataclass
class Violation:
    index: int
    event: str
    kind: str
    detail: str

    def __str__(self) -> str:
        return f"event {self.index} ({self.event}): {self.kind}: {self.detail}"


@dataclass
class FuzzResult:
    seed: int | None
    events: int = 0
    collections: int = 0
    threshold_collections: int = 0
    verified_collections: int = 0
    cycle_collections: int = 0
    audits: int = 0
    allocations: int = 0
    violations: list[Violation] = field(default_factory=list)
    finalize_counts: Counter = field(default_factory=Counter)
    stats: CollectionStats = field(default_factory=CollectionStats)
    elapsed: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations

    def violations_of(self, kind: str) -> list[Violation]:
        return [v for v in self.violations if v.kind == kind]

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "events": self.events,
            "allocations": self.allocations,
            "collections": self.collections,
            "threshold_collections": self.threshold_collections,
            "verified_collections": self.verified_collections,
            "cycle_collections": self.cycle_collections,
            "audits": self.audits,
            "max_finalize_count": max(self.finalize_counts.values(), default=0),
            "stats": self.stats.as_dict(),
            "violations": [str(v) for v in self.violations],
        }


class _Replay:
    def __init__(self, heap: Heap, verify: bool, result: FuzzResult) -> None:
        self.heap = heap
        self.verify = verify
        self.result = result
        self.shadow = ShadowGraph()
        self.vars: dict[int, ManagedRef] = {}
        self.var_record: dict[int, int] = {}
        self.address_of: dict[int, int] = {}
        self.record_at: dict[int, int] = {}
        self.log: list[int] = []
        self.seen = 0
        self.index = 0
        self.event = ""

    def fail(self, kind: str, detail: str) -> None:
        self.result.violations.append(Violation(self.index, self.event, kind, detail))

    def new_finalized(self) -> list[int]:
        fresh = self.log[self.seen :]
        self.seen = len(self.log)
        return fresh

    def check_collection(self, reclaimed: list[int], trigger: str) -> None:
        """Compare one collection's reclaimed set with the oracle."""
        shadow = self.shadow
        got = set(reclaimed)
        if len(got) != len(reclaimed):
            self.fail("finalize-once", f"record finalized twice in one {trigger} collection")
        if self.verify:
            live = reachable(shadow)
            expected = set() if self.heap.mode is Mode.NEVER_COLLECT else shadow.nodes - live
            wrongly = got & live
            if wrongly:
                self.fail("soundness", f"{trigger} collection reclaimed reachable {sorted(wrongly)}")
            if got != expected:
                missed = expected - got
                extra = got - expected - wrongly
                if missed or extra:
                    self.fail(
                        "completeness",
                        f"{trigger} collection missed {sorted(missed)}, extra {sorted(extra)}",
                    )
            self.result.verified_collections += 1
            if got and has_cycle(shadow, got):
                self.result.cycle_collections += 1
        shadow.remove(got)

    def run(self, events: Iterable[Event]) -> None:
        heap = self.heap
        shadow = self.shadow
        vars_ = self.vars
        var_record = self.var_record
        for self.index, event in enumerate(events):
            kind, args = event.kind, event.args
            self.event = str(event)
            if kind == "alloc":
                var, record, nbytes, *kids = args
                before = heap.state.stats.collections_run
                node = FuzzNode(record, [vars_[k].copy() for k in kids], self.log)
                handle = heap.alloc(node, size=nbytes)
                del node
                if heap.state.stats.collections_run != before:
                    self.result.collections += 1
                    self.result.threshold_collections += 1
                    self.check_collection(self.new_finalized(), "threshold")
                shadow.alloc(record, [var_record[k] for k in kids])
                vars_[var] = handle
                var_record[var] = record
                self.address_of[record] = handle.address
                self.record_at[handle.address] = record
                self.result.allocations += 1
            elif kind == "copy":
                src, dst = args
                vars_[dst] = vars_[src].copy()
                var_record[dst] = var_record[src]
                shadow.copy(var_record[src])
            elif kind == "load":
                parent, index, dst = args
                handle = vars_[parent].deref().children[index].copy()
                record = shadow.edges[var_record[parent]][index]
                if self.verify and handle.address != self.address_of[record]:
                    self.fail("aliasing", f"child {index} of var {parent} is not record {record}")
                vars_[dst] = handle
                var_record[dst] = record
                shadow.copy(record)
                del handle
            elif kind == "drop":
                (var,) = args
                handle = vars_.pop(var)
                shadow.drop(var_record.pop(var))
                if var % 2 == 0:
                    handle.drop()
                del handle  # odd vars are released implicitly here
            elif kind == "link":
                parent, child = args
                vars_[parent].deref_mut().children.append(vars_[child].copy())
                shadow.link(var_record[parent], var_record[child])
            elif kind == "unlink":
                parent, index = args
                vars_[parent].deref_mut().children.pop(index)
                shadow.unlink(var_record[parent], index)
            elif kind == "collect":
                heap.collect()
                self.result.collections += 1
                self.check_collection(self.new_finalized(), "explicit")
            elif kind == "audit":
                self.audit()
            else:
                raise ValueError(f"unknown event kind {kind!r}")

    def audit(self) -> None:
        self.result.audits += 1
        counts = self.heap.root_counts()
        census = {self.address_of[r]: c for r, c in self.shadow.root_census().items()}
        if counts != census:
            diff = {
                self.record_at.get(a, a): (counts.get(a, 0), census.get(a, 0))
                for a in set(counts) | set(census)
                if counts.get(a, 0) != census.get(a, 0)
            }
            self.fail("root-exactness", f"(heap, census) per record: {diff}")


def replay(
    events: Iterable[Event],
    heap: Heap | None = None,
    *,
    verify: bool = True,
    seed: int | None = None,
) -> FuzzResult:
    """Run ``events`` against ``heap`` and check it against the oracle."""
    heap = heap if heap is not None else Heap()
    result = FuzzResult(seed=seed)
    events = list(events)
    result.events = len(events)
    state = _Replay(heap, verify, result)
    started = time.perf_counter()
    try:
        state.run(events)
    except Exception as exc:  # a usage error here means the heap misbehaved
        state.fail("crash", f"{type(exc).__name__}: {exc}")
    result.finalize_counts = Counter(state.log)
    for record, count in result.finalize_counts.items():
        if count > 1:
            state.fail("finalize-once", f"record {record} finalized {count} times")
    result.stats = heap.report()
    if result.stats.finalizers_run != len(state.log):
        state.fail(
            "finalize-once",
            f"finalizers_run={result.stats.finalizers_run} but {len(state.log)} hooks observed",
        )
    if result.stats.finalizers_run != result.stats.records_reclaimed:
        state.fail(
            "finalize-once",
            f"finalizers_run={result.stats.finalizers_run} != "
            f"records_reclaimed={result.stats.records_reclaimed}",
        )
    result.elapsed = time.perf_counter() - started
    return result


def run_fuzz(
    seed: int,
    steps: int = 10_000,
    nodes: int = 50,
    *,
    verify: bool = True,
    config: HeapConfig = HeapConfig(),
    audits: int = 10,
    cycle_probability: float = 0.1,
    collect_probability: float = 0.02,
) -> FuzzResult:
    events = generate_workload(
        seed,
        nodes,
        steps,
        audits=audits,
        cycle_probability=cycle_probability,
        collect_probability=collect_probability,
    )
    heap = config.make_heap(keep_history=False)
    try:
        return replay(events, heap, verify=verify, seed=seed)
    finally:
        heap.close()
