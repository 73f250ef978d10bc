"""The user-facing reference type.

A :class:`ManagedRef` is a small, freely copyable handle to a payload that
lives in a :class:`~gcheap.heap.Heap`.  Every handle instance is in one of
three states:

``ROOTED``
    Held by ordinary Python code.  Counted in the heap's root registry, so
    the target survives collection.
``INTERIOR``
    Stored inside another managed payload.  Not a root; keeps its target
    alive only while the containing record is reachable.
``DROPPED``
    Released.  Any further use raises :class:`HandleUsageError`.

Rooted handles unroot themselves when Python releases them, so ordinary
code never calls a root/unroot API.  :meth:`ManagedRef.drop` exists for
callers that want the release to happen at a precise point.

Attribute access is forwarded to the payload, which makes mutation through
any alias look like plain attribute assignment::

    >>> from dataclasses import dataclass
    >>> from gcheap import Heap, traceable
    >>> @traceable
    ... @dataclass
    ... class Counter:
    ...     n: int
    >>> heap = Heap()
    >>> a = heap.alloc(Counter(1))
    >>> b = a.copy()
    >>> b.n += 1
    >>> a.n
    2
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Any, Generic, TypeVar

if TYPE_CHECKING:
    from gcheap.collector import HeapRecord
    from gcheap.heap import Heap

T = TypeVar("T")

ROOTED = "rooted"
INTERIOR = "interior"
DROPPED = "dropped"

_OWN_SLOTS = frozenset({"_heap", "_record", "_state"})


class ManagedRef(Generic[T]):
    """Copyable handle to a value on the managed heap."""

    __slots__ = ("_heap", "_record", "_state", "__weakref__")

    def __init__(self, heap: Heap, record: HeapRecord, state: str = ROOTED) -> None:
        object.__setattr__(self, "_heap", heap)
        object.__setattr__(self, "_record", record)
        object.__setattr__(self, "_state", state)

    @classmethod
    def new(cls, value: T, heap: Heap | None = None) -> ManagedRef[T]:
        """Move ``value`` onto ``heap`` (the calling thread's default heap if omitted)."""
        if heap is None:
            from gcheap.heap import default_heap

            heap = default_heap()
        return heap.alloc(value)

    @property
    def address(self) -> int:
        return self._record.address

    @property
    def kind(self) -> type:
        """Static type of the payload, fixed at allocation."""
        return self._record.kind

    @property
    def heap(self) -> Heap:
        return self._heap

    @property
    def state(self) -> str:
        return self._state

    @property
    def is_rooted(self) -> bool:
        return self._state is ROOTED

    def deref(self) -> T:
        """Return the payload itself (never a copy)."""
        return self._heap._deref(self)

    def deref_mut(self) -> T:
        """Return the payload for mutation.

        No exclusivity check is made; writes are seen through every alias.
        """
        return self._heap._deref(self)

    def copy(self) -> ManagedRef[T]:
        """Return a new rooted handle to the same record."""
        return self._heap._copy(self)

    def drop(self) -> None:
        """Release this handle now instead of waiting for Python to do it."""
        self._heap._drop(self)

    __copy__ = copy

    def __deepcopy__(self, memo: dict) -> ManagedRef[T]:
        return self.copy()

    def __enter__(self) -> ManagedRef[T]:
        return self

    def __exit__(self, *exc: object) -> None:
        if self._state is ROOTED:
            self.drop()

    def __getattr__(self, name: str) -> Any:
        if name.startswith("__") or name in _OWN_SLOTS:
            raise AttributeError(name)
        return getattr(self.deref(), name)

    def __setattr__(self, name: str, value: Any) -> None:
        if name in _OWN_SLOTS:
            object.__setattr__(self, name, value)
        else:
            setattr(self.deref_mut(), name, value)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, ManagedRef):
            return self._record is other._record
        return NotImplemented

    def __hash__(self) -> int:
        return hash((id(self._heap), self._record.address))

    def __repr__(self) -> str:
        record = self._record
        return f"<ManagedRef {record.kind.__name__}@{record.address} {self._state}>"

    def __del__(self) -> None:
        if getattr(self, "_state", None) is ROOTED:
            try:
                self._heap._release(self)
            except Exception:
                # interpreter shutdown or a torn-down heap; nothing to unroot
                pass
