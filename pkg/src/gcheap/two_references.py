"""Two mutable aliases of one managed object.

A handle can be duplicated by plain assignment or with ``copy()``, and a
write through either one is seen through the other.  No borrowing step and
no manual reference-count bump is involved.

>>> from gcheap import Heap
>>> heap = Heap()
>>> c1, c2 = make_two_references(heap)
>>> c1.n, c2.n
(43, 43)
>>> c1 == c2
True

Once both handles are gone the object is garbage:

>>> del c1, c2
>>> heap.collect().records_reclaimed
1
"""

from __future__ import annotations

from dataclasses import dataclass

from gcheap.handle import ManagedRef
from gcheap.heap import Heap
from gcheap.tracing import traceable


@traceable
@dataclass
class IntContainer:
    n: int


def set_value(c: ManagedRef[IntContainer], n: int) -> None:
    c.n = n


def make_two_references(heap: Heap) -> tuple[ManagedRef[IntContainer], ManagedRef[IntContainer]]:
    c1 = heap.alloc(IntContainer(n=42))
    c2 = c1.copy()
    set_value(c2, 42)
    set_value(c1, 43)
    return c1, c2
