"""Mark/sweep over the allocation registry.

Every allocation is appended to ``CollectorState.records`` (insertion
ordered, so sweeping and finalization run in allocation order).  A
collection marks everything reachable from the root registry by following
trace hooks, then walks the registry once: unmarked records are finalized
and released, marked ones have their mark cleared.

Collection is triggered explicitly or by :func:`maybe_collect_on_alloc`
when the bytes allocated since the last collection would exceed
``threshold_bytes``.  After a triggered collection the threshold grows to
``growth_factor`` times the surviving payload bytes, and never shrinks.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field, fields, replace
from typing import Any, Callable, Iterable, Protocol

from gcheap.errors import HeapCorruptionError
from gcheap.tracing import finalizer_for, trace

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD_BYTES = 1 << 20
DEFAULT_GROWTH_FACTOR = 2.0


class Mode(str, enum.Enum):
    NORMAL = "normal"
    NEVER_COLLECT = "never_collect"


class HeapRecord:
    """Per-allocation metadata plus the payload itself."""

    __slots__ = ("address", "kind", "payload", "size", "mark", "finalized", "freed", "finalize_hook")

    def __init__(self, address: int, payload: Any, size: int) -> None:
        self.address = address
        self.kind: type = type(payload)
        self.payload = payload
        self.size = size
        self.mark = False
        self.finalized = False
        self.freed = False
        self.finalize_hook: Callable[[Any], None] | None = finalizer_for(self.kind)

    def trace(self, visit: Callable[[Any], None]) -> None:
        trace(self.payload, visit)

    def release(self) -> None:
        self.payload = None
        self.freed = True

    def __repr__(self) -> str:
        return f"<HeapRecord {self.kind.__name__}@{self.address} size={self.size}>"


@dataclass
class CollectionStats:
    collections_run: int = 0
    records_reclaimed: int = 0
    records_live_after_last: int = 0
    bytes_reclaimed: int = 0
    finalizers_run: int = 0
    last_mark_duration: float = 0.0
    last_sweep_duration: float = 0.0

    def absorb(self, delta: CollectionStats) -> None:
        self.collections_run += delta.collections_run
        self.records_reclaimed += delta.records_reclaimed
        self.bytes_reclaimed += delta.bytes_reclaimed
        self.finalizers_run += delta.finalizers_run
        self.records_live_after_last = delta.records_live_after_last
        self.last_mark_duration = delta.last_mark_duration
        self.last_sweep_duration = delta.last_sweep_duration

    def as_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class CollectionEvent:
    """One completed collection, kept for reporting."""

    index: int
    trigger: str
    delta: CollectionStats
    reclaimed: list[int]


class Roots(Protocol):
    def items(self) -> Iterable[tuple[int, int]]: ...

    def absorb(self, records: Iterable[HeapRecord]) -> None: ...


@dataclass
class CollectorState:
    mode: Mode = Mode.NORMAL
    threshold_bytes: int = DEFAULT_THRESHOLD_BYTES
    growth_factor: float = DEFAULT_GROWTH_FACTOR
    records: dict[int, HeapRecord] = field(default_factory=dict)
    bytes_allocated_since_collect: int = 0
    bytes_live: int = 0
    records_allocated: int = 0
    bytes_allocated: int = 0
    stats: CollectionStats = field(default_factory=CollectionStats)
    history: list[CollectionEvent] = field(default_factory=list)
    collecting: bool = False
    keep_history: bool = True

    def __post_init__(self) -> None:
        self.mode = Mode(self.mode)
        if self.threshold_bytes < 0:
            raise ValueError("threshold_bytes must be non-negative")
        if self.growth_factor < 1.0:
            raise ValueError("growth_factor must be at least 1.0")

    def insert(self, record: HeapRecord) -> None:
        self.records[record.address] = record
        self.records_allocated += 1
        self.bytes_allocated += record.size
        self.bytes_live += record.size
        self.bytes_allocated_since_collect += record.size


def _mark(state: CollectorState, roots: Roots) -> None:
    records = state.records
    stack: list[HeapRecord] = []
    for address, count in roots.items():
        if count <= 0:
            continue
        record = records.get(address)
        if record is None:
            raise HeapCorruptionError(f"root refers to unknown address {address}")
        if not record.mark:
            record.mark = True
            stack.append(record)

    def visit(handle: Any) -> None:
        target = records.get(handle.address)
        if target is None:
            raise HeapCorruptionError(
                f"trace reached address {handle.address}, which is not in the registry"
            )
        if not target.mark:
            target.mark = True
            stack.append(target)

    while stack:
        stack.pop().trace(visit)


def _sweep(state: CollectorState, delta: CollectionStats, reclaimed: list[int]) -> None:
    survivors: dict[int, HeapRecord] = {}
    for address, record in state.records.items():
        if record.mark:
            record.mark = False
            survivors[address] = record
            continue
        hook = record.finalize_hook
        if hook is not None and not record.finalized:
            record.finalized = True
            delta.finalizers_run += 1
            try:
                hook(record.payload)
            except Exception:
                log.exception("finalizer for %r raised; continuing sweep", record)
        delta.records_reclaimed += 1
        delta.bytes_reclaimed += record.size
        reclaimed.append(address)
        record.release()
    state.records = survivors


def collect(state: CollectorState, roots: Roots, trigger: str = "explicit") -> CollectionStats:
    """Run one full mark/sweep and return what it did.

    In never-collect mode this is a no-op returning a zero delta.
    """
    if state.mode is Mode.NEVER_COLLECT:
        return CollectionStats(records_live_after_last=len(state.records))
    delta = CollectionStats(collections_run=1)
    reclaimed: list[int] = []
    state.collecting = True
    try:
        roots.absorb(state.records.values())
        started = time.perf_counter()
        _mark(state, roots)
        marked = time.perf_counter()
        _sweep(state, delta, reclaimed)
        delta.last_mark_duration = marked - started
        delta.last_sweep_duration = time.perf_counter() - marked
    except BaseException:
        for record in state.records.values():
            record.mark = False
        raise
    finally:
        state.collecting = False
    state.bytes_live -= delta.bytes_reclaimed
    state.bytes_allocated_since_collect = 0
    delta.records_live_after_last = len(state.records)
    state.stats.absorb(delta)
    if state.keep_history:
        state.history.append(
            CollectionEvent(state.stats.collections_run, trigger, replace(delta), reclaimed)
        )
    return delta


def force_collect(state: CollectorState, roots: Roots) -> CollectionStats:
    return collect(state, roots, trigger="explicit")


def maybe_collect_on_alloc(state: CollectorState, roots: Roots, incoming_bytes: int) -> bool:
    """Collect first if admitting ``incoming_bytes`` would cross the threshold."""
    if state.mode is Mode.NEVER_COLLECT:
        return False
    if state.bytes_allocated_since_collect + incoming_bytes <= state.threshold_bytes:
        return False
    collect(state, roots, trigger="threshold")
    state.threshold_bytes = max(
        state.threshold_bytes, int(state.growth_factor * state.bytes_live)
    )
    return True


def heap_report(state: CollectorState) -> CollectionStats:
    """Snapshot of the cumulative counters; ``records_live_after_last`` is the current live count."""
    snapshot = replace(state.stats)
    snapshot.records_live_after_last = len(state.records)
    return snapshot
