"""The managed heap: allocation, handle lifecycle and root bookkeeping.

Roots are tracked by handle lifecycle rather than by scanning stacks:

* allocating or copying a handle adds one root for its target;
* dropping a handle, or Python releasing the last reference to it,
  removes one;
* a handle that ends up inside a managed payload stops being a root.  This
  happens to handles inside a value passed to :meth:`Heap.alloc`, and to
  handles stored into an already managed payload, which are picked up the
  next time the heap reaches a quiescent point (a collection or a root
  audit).

Storing a handle into a payload therefore hands that handle instance over
to the heap.  Store ``h.copy()`` to keep ``h`` itself as a root.

Everything is confined to the thread that created the heap.
"""

from __future__ import annotations

import sys
import threading
from dataclasses import dataclass
from typing import Any, Iterable, Iterator, TypeVar

from gcheap import collector
from gcheap.collector import CollectionStats, CollectorState, HeapRecord, Mode
from gcheap.errors import (
    CollectionInProgressError,
    DanglingHandleError,
    HandleUsageError,
    HeapCorruptionError,
    UntraceableTypeError,
)
from gcheap.handle import DROPPED, INTERIOR, ROOTED, ManagedRef
from gcheap.tracing import is_traceable_type, trace

T = TypeVar("T")


class RootRegistry:
    """Multiset of heap addresses held by rooted handles."""

    __slots__ = ("_counts", "owner")

    def __init__(self, owner: Heap | None = None) -> None:
        self._counts: dict[int, int] = {}
        self.owner = owner

    def add(self, address: int) -> None:
        counts = self._counts
        counts[address] = counts.get(address, 0) + 1

    def remove(self, address: int) -> None:
        counts = self._counts
        count = counts.get(address, 0)
        if count <= 0:
            raise HeapCorruptionError(f"root count for address {address} would underflow")
        if count == 1:
            del counts[address]
        else:
            counts[address] = count - 1

    def count(self, address: int) -> int:
        return self._counts.get(address, 0)

    def items(self) -> Iterable[tuple[int, int]]:
        return self._counts.items()

    def snapshot(self) -> dict[int, int]:
        return dict(self._counts)

    def absorb(self, records: Iterable[HeapRecord]) -> int:
        """Unroot every rooted handle found inside a live payload.

        Returns how many handle instances changed hands.
        """
        moved = 0
        owner = self.owner

        def visit(handle: ManagedRef) -> None:
            nonlocal moved
            # foreign handles are left for the mark phase to reject
            if handle._state is ROOTED and (owner is None or handle._heap is owner):
                handle._state = INTERIOR
                self.remove(handle._record.address)
                moved += 1

        for record in records:
            record.trace(visit)
        return moved

    def __len__(self) -> int:
        return len(self._counts)

    def __contains__(self, address: object) -> bool:
        return address in self._counts

    def __iter__(self) -> Iterator[int]:
        return iter(self._counts)


@dataclass(frozen=True)
class HeapConfig:
    mode: Mode = Mode.NORMAL
    threshold_bytes: int = collector.DEFAULT_THRESHOLD_BYTES
    growth_factor: float = collector.DEFAULT_GROWTH_FACTOR

    def make_heap(self, **kwargs: Any) -> Heap:
        return Heap(
            mode=self.mode,
            threshold_bytes=self.threshold_bytes,
            growth_factor=self.growth_factor,
            **kwargs,
        )


class Heap:
    """A collector-managed region.

    >>> heap = Heap()
    >>> h = heap.alloc([1, 2, 3])
    >>> h.deref()
    [1, 2, 3]
    >>> h.drop()
    >>> heap.collect().records_reclaimed
    1
    """

    def __init__(
        self,
        mode: Mode | str = Mode.NORMAL,
        threshold_bytes: int = collector.DEFAULT_THRESHOLD_BYTES,
        growth_factor: float = collector.DEFAULT_GROWTH_FACTOR,
        *,
        check_thread: bool = True,
        keep_history: bool = True,
    ) -> None:
        self.state = CollectorState(
            mode=Mode(mode),
            threshold_bytes=threshold_bytes,
            growth_factor=growth_factor,
            keep_history=keep_history,
        )
        self.roots = RootRegistry(self)
        self._owner = threading.get_ident()
        self._check_thread = check_thread
        self._next_address = 1
        self._deferred: list[int] = []
        self._closed = False

    # -- configuration ----------------------------------------------------

    @property
    def mode(self) -> Mode:
        return self.state.mode

    @property
    def threshold_bytes(self) -> int:
        return self.state.threshold_bytes

    @property
    def growth_factor(self) -> float:
        return self.state.growth_factor

    # -- guards -------------------------------------------------------------

    def _enter(self) -> None:
        if self._closed:
            raise HandleUsageError("heap is closed")
        if self._check_thread and threading.get_ident() != self._owner:
            raise HandleUsageError("heap used from a thread other than the one that created it")
        if self.state.collecting:
            raise CollectionInProgressError("heap touched while a collection is running")
        if self._deferred:
            self._settle()

    def _settle(self) -> None:
        pending, self._deferred = self._deferred, []
        for address in pending:
            self.roots.remove(address)

    def _live_record(self, handle: ManagedRef) -> HeapRecord:
        if handle._state is DROPPED:
            raise HandleUsageError("handle was already dropped")
        if handle._heap is not self:
            raise HandleUsageError("handle belongs to a different heap")
        record = handle._record
        if record.freed:
            raise DanglingHandleError(f"record {record.address} has been reclaimed")
        return record

    # -- allocation ---------------------------------------------------------

    def alloc(self, value: T, *, size: int | None = None) -> ManagedRef[T]:
        """Move ``value`` onto the heap and return a rooted handle to it.

        Handles contained in ``value`` are handed over to the new record.
        ``size`` is the byte count used for the trigger policy and the
        statistics; it defaults to ``sys.getsizeof(value)``.
        """
        self._enter()
        if not is_traceable_type(type(value)):
            raise UntraceableTypeError(
                f"{type(value).__qualname__} has no __trace__ hook; decorate it with "
                "@traceable or define __trace__(self, visit)"
            )
        contained: list[ManagedRef] = []
        trace(value, contained.append)
        for handle in contained:
            self._live_record(handle)
        nbytes = sys.getsizeof(value) if size is None else int(size)
        if nbytes < 0:
            raise ValueError("size must be non-negative")

        state = self.state
        if (
            state.mode is Mode.NORMAL
            and state.bytes_allocated_since_collect + nbytes > state.threshold_bytes
        ):
            # the value is not on the heap yet, so its handles must be pinned
            pinned = [h._record.address for h in contained if h._state is INTERIOR]
            for address in pinned:
                self.roots.add(address)
            try:
                collector.maybe_collect_on_alloc(state, self.roots, nbytes)
            finally:
                for address in pinned:
                    self.roots.remove(address)

        record = HeapRecord(self._next_address, value, nbytes)
        self._next_address += 1
        state.insert(record)
        for handle in contained:
            if handle._state is ROOTED:
                handle._state = INTERIOR
                self.roots.remove(handle._record.address)
        self.roots.add(record.address)
        return ManagedRef(self, record)

    # -- handle operations (called through ManagedRef) ----------------------

    def _deref(self, handle: ManagedRef) -> Any:
        if self.state.collecting:
            raise CollectionInProgressError("dereference while a collection is running")
        if self._check_thread and threading.get_ident() != self._owner:
            raise HandleUsageError("handle used from a thread other than the heap's owner")
        return self._live_record(handle).payload

    def _copy(self, handle: ManagedRef) -> ManagedRef:
        self._enter()
        record = self._live_record(handle)
        self.roots.add(record.address)
        return ManagedRef(self, record)

    def _drop(self, handle: ManagedRef) -> None:
        self._enter()
        if handle._state is DROPPED:
            raise HandleUsageError("handle dropped twice")
        if handle._state is INTERIOR:
            raise HandleUsageError("handle is owned by a managed payload and cannot be dropped")
        handle._state = DROPPED
        self.roots.remove(handle._record.address)

    def _release(self, handle: ManagedRef) -> None:
        # called from ManagedRef.__del__, possibly at an awkward moment
        handle._state = DROPPED
        if self._closed:
            return
        if self.state.collecting or threading.get_ident() != self._owner:
            self._deferred.append(handle._record.address)
        else:
            self.roots.remove(handle._record.address)

    # -- collection ---------------------------------------------------------

    def collect(self) -> CollectionStats:
        """Run a full collection now; returns the delta."""
        self._enter()
        return collector.force_collect(self.state, self.roots)

    force_collect = collect

    def report(self) -> CollectionStats:
        self._enter()
        return collector.heap_report(self.state)

    def root_counts(self) -> dict[int, int]:
        """Root count per address, measured at a quiescent point."""
        self._enter()
        self.roots.absorb(self.state.records.values())
        return self.roots.snapshot()

    def root_count(self, target: ManagedRef | int) -> int:
        address = target.address if isinstance(target, ManagedRef) else target
        return self.root_counts().get(address, 0)

    # -- introspection -------------------------------------------------------

    def __len__(self) -> int:
        return len(self.state.records)

    def is_live(self, target: ManagedRef | int) -> bool:
        address = target.address if isinstance(target, ManagedRef) else target
        return address in self.state.records

    def live_addresses(self) -> list[int]:
        return list(self.state.records)

    @property
    def history(self) -> list[collector.CollectionEvent]:
        return self.state.history

    def close(self) -> None:
        """Drop every record without running finalizers."""
        if self._closed:
            return
        for record in self.state.records.values():
            record.release()
        self.state.records.clear()
        self._closed = True

    def __enter__(self) -> Heap:
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    def __repr__(self) -> str:
        return (
            f"<Heap mode={self.state.mode.value} records={len(self.state.records)} "
            f"roots={sum(c for _, c in self.roots.items())}>"
        )


_local = threading.local()


def default_heap() -> Heap:
    """The calling thread's implicit heap, created on first use."""
    heap = getattr(_local, "heap", None)
    if heap is None or heap._closed:
        heap = _local.heap = Heap()
    return heap


def alloc(value: T, heap: Heap | None = None, *, size: int | None = None) -> ManagedRef[T]:
    return (heap if heap is not None else default_heap()).alloc(value, size=size)


def copy_handle(handle: ManagedRef[T]) -> ManagedRef[T]:
    return handle.copy()


def drop_handle(handle: ManagedRef) -> None:
    handle.drop()


def deref(handle: ManagedRef[T]) -> T:
    return handle.deref()


def deref_mut(handle: ManagedRef[T]) -> T:
    return handle.deref_mut()
