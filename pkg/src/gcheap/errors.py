"""Exception hierarchy for the managed heap."""


class HeapError(Exception):
    """Base class for every error raised by gcheap."""


class HandleUsageError(HeapError):
    """A handle was used outside its contract.

    Covers double drops, use after drop, cross-thread access, and touching
    the heap from inside a finalizer.  These are programming errors; the
    heap is left consistent but the offending call did nothing.
    """


class DanglingHandleError(HandleUsageError):
    """Dereferenced a handle whose record has already been reclaimed."""


class CollectionInProgressError(HandleUsageError):
    """The heap was touched while a collection was running."""


class HeapCorruptionError(HeapError):
    """Internal consistency check failed (a trace reached an unknown address)."""


class UntraceableTypeError(TypeError, HeapError):
    """The payload type has no trace hook and cannot live on the managed heap."""


class DerivationError(TypeError, HeapError):
    """Automatic trace derivation rejected a field."""

    def __init__(self, owner: str, field: str, reason: str) -> None:
        self.owner = owner
        self.field = field
        self.reason = reason
        super().__init__(f"cannot derive trace for {owner}.{field}: {reason}")
