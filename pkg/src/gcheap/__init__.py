"""Managed heap with copyable mutable handles and precise mark/sweep collection."""

from gcheap.collector import CollectionStats, Mode
from gcheap.errors import (
    CollectionInProgressError,
    DanglingHandleError,
    DerivationError,
    HandleUsageError,
    HeapCorruptionError,
    HeapError,
    UntraceableTypeError,
)
from gcheap.handle import ManagedRef
from gcheap.heap import (
    Heap,
    HeapConfig,
    RootRegistry,
    alloc,
    copy_handle,
    default_heap,
    deref,
    deref_mut,
    drop_handle,
)
from gcheap.tracing import NO_TRACE, default_finalize, derive_trace, trace, trace_handles, traceable

__all__ = [
    "CollectionInProgressError",
    "CollectionStats",
    "DanglingHandleError",
    "DerivationError",
    "HandleUsageError",
    "Heap",
    "HeapConfig",
    "HeapCorruptionError",
    "HeapError",
    "ManagedRef",
    "Mode",
    "NO_TRACE",
    "RootRegistry",
    "UntraceableTypeError",
    "alloc",
    "copy_handle",
    "default_finalize",
    "default_heap",
    "deref",
    "deref_mut",
    "derive_trace",
    "drop_handle",
    "trace",
    "trace_handles",
    "traceable",
]

__version__ = "0.1.0"
