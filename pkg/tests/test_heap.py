from __future__ import annotations

import threading
from dataclasses import dataclass, field

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gcheap import (
    CollectionInProgressError,
    DanglingHandleError,
    HandleUsageError,
    Heap,
    ManagedRef,
    alloc,
    copy_handle,
    default_heap,
    deref,
    deref_mut,
    drop_handle,
    traceable,
)
from gcheap.testkit import ShadowGraph, reachable
from gcheap.two_references import IntContainer, make_two_references, set_value


@traceable
@dataclass(eq=False)
class Pair:
    a: ManagedRef
    b: ManagedRef


@traceable
@dataclass(eq=False)
class Node:
    label: str
    children: list[ManagedRef] = field(default_factory=list)


@pytest.fixture
def heap():
    h = Heap()
    yield h
    h.close()


# -- alloc ---------------------------------------------------------------------


def test_alloc_moves_value_and_deref_reads_it(heap):
    h = heap.alloc(IntContainer(n=42))
    assert deref(h).n == 42
    assert h.n == 42
    assert h.kind is IntContainer


def test_first_alloc_grows_registry_to_one(heap):
    assert len(heap) == 0
    heap.alloc(IntContainer(1))
    assert len(heap) == 1


def test_alloc_unroots_handles_moved_into_the_value(heap):
    h1 = heap.alloc(IntContainer(7))
    target = h1.address
    assert heap.root_count(target) == 1
    pair = heap.alloc(Pair(h1, h1))
    assert heap.root_count(target) == 0
    assert heap.root_count(pair) == 1
    assert not h1.is_rooted

    # the oracle agrees the record is still live, via the pair only
    g = ShadowGraph()
    g.alloc(1)
    g.alloc(2, [1, 1])
    g.drop(1)
    assert reachable(g) == {1, 2}

    assert heap.collect().records_reclaimed == 0
    assert deref(pair).a.n == 7
    pair.drop()
    assert heap.collect().records_reclaimed == 2


def test_alloc_with_dropped_handle_inside_is_rejected(heap):
    h = heap.alloc(IntContainer(1))
    stale = h.copy()
    stale.drop()
    with pytest.raises(HandleUsageError):
        heap.alloc(Pair(h, stale))
    assert len(heap) == 1
    assert heap.root_count(h) == 1


def test_handle_from_another_heap_is_rejected(heap):
    other = Heap()
    foreign = other.alloc(IntContainer(1))
    with pytest.raises(HandleUsageError, match="different heap"):
        heap.alloc(Pair(foreign, foreign))
    other.close()


def test_managed_ref_new_uses_the_thread_default_heap():
    h = ManagedRef.new(IntContainer(5))
    assert h.heap is default_heap()
    assert alloc(IntContainer(6)).heap is default_heap()
    assert h.n == 5


# -- copy ----------------------------------------------------------------------


def test_copy_aliases_the_same_record(heap):
    c1 = heap.alloc(IntContainer(42))
    c2 = copy_handle(c1)
    assert c2 == c1 and c2 is not c1
    assert c2.address == c1.address
    assert hash(c2) == hash(c1)
    assert heap.root_count(c1) == 2


def test_both_aliases_read_final_write(heap):
    c1, c2 = make_two_references(heap)
    assert (c1.n, c2.n) == (43, 43)
    set_value(c2, 7)
    assert c1.n == 7


def test_copy_is_allocation_free_and_leaves_payload_alone(heap):
    h = heap.alloc(IntContainer(3))
    payload = deref(h)
    before = (len(heap), heap.state.bytes_allocated, heap.state.records_allocated)
    copies = [h.copy() for _ in range(100)]
    assert (len(heap), heap.state.bytes_allocated, heap.state.records_allocated) == before
    assert deref(copies[-1]) is payload and payload.n == 3


def test_copy_survives_drop_of_original(heap):
    original = heap.alloc(IntContainer(1))
    kept = original.copy()
    original.drop()
    assert heap.collect().records_reclaimed == 0
    assert kept.n == 1


def test_copy_module_protocol(heap):
    import copy

    h = heap.alloc(IntContainer(1))
    shallow, deep = copy.copy(h), copy.deepcopy(h)
    assert shallow == h and deep == h
    assert heap.root_count(h) == 3
    del shallow, deep
    assert heap.root_count(h) == 1


# -- drop ----------------------------------------------------------------------


def test_dropping_sole_handle_reclaims_and_finalizes_once(heap):
    log = []

    @traceable(finalize=lambda p: log.append(p.label))
    @dataclass
    class Tracked:
        label: str

    h = heap.alloc(Tracked("x"))
    drop_handle(h)
    delta = heap.collect()
    assert delta.records_reclaimed == 1
    assert log == ["x"]
    heap.collect()
    assert log == ["x"]


def test_drop_one_of_two_copies(heap):
    a = heap.alloc(IntContainer(1))
    b = a.copy()
    assert heap.root_count(a) == 2
    b.drop()
    assert heap.root_count(a) == 1
    assert heap.collect().records_reclaimed == 0


def test_drop_then_collect_on_single_record_heap(heap):
    heap.alloc(IntContainer(1)).drop()
    heap.collect()
    report = heap.report()
    assert report.records_reclaimed == 1
    assert report.records_live_after_last == 0


def test_double_drop_is_a_usage_error(heap):
    h = heap.alloc(IntContainer(1))
    h.drop()
    with pytest.raises(HandleUsageError, match="twice"):
        h.drop()
    assert heap.root_counts() == {}


def test_use_after_drop_is_a_usage_error(heap):
    h = heap.alloc(IntContainer(1))
    keep = h.copy()
    h.drop()
    with pytest.raises(HandleUsageError):
        deref(h)
    with pytest.raises(HandleUsageError):
        h.copy()
    assert keep.n == 1


def test_interior_handle_cannot_be_dropped(heap):
    child = heap.alloc(IntContainer(1))
    parent = heap.alloc(Pair(child, child))
    with pytest.raises(HandleUsageError, match="owned by a managed payload"):
        deref(parent).a.drop()


def test_releasing_the_python_reference_unroots(heap):
    h = heap.alloc(IntContainer(1))
    extra = h.copy()
    assert heap.root_count(h) == 2
    del extra
    assert heap.root_count(h) == 1
    address = h.address
    del h
    assert heap.root_counts().get(address, 0) == 0
    assert heap.collect().records_reclaimed == 1


def test_context_manager_drops_on_exit(heap):
    with heap.alloc(IntContainer(1)) as h:
        assert h.n == 1
    assert h.state == "dropped"
    assert heap.collect().records_reclaimed == 1


# -- deref / deref_mut -----------------------------------------------------------


def test_deref_returns_the_payload_not_a_copy(heap):
    value = IntContainer(42)
    h = heap.alloc(value)
    assert deref(h) is value
    assert deref(h) == IntContainer(42)


def test_deref_mut_write_then_read(heap):
    h = heap.alloc(IntContainer(0))
    deref_mut(h).n = 99
    assert deref(h).n == 99


def test_payload_address_is_stable_across_collections(heap):
    keep = heap.alloc(Node("keep"))
    where = id(deref(keep))
    for i in range(50):
        heap.alloc(Node(f"garbage{i}"))
        if i % 10 == 0:
            heap.collect()
    assert id(deref(keep)) == where


@settings(max_examples=60, deadline=None)
@given(
    k=st.integers(min_value=1, max_value=6),
    writes=st.lists(st.tuples(st.integers(0, 5), st.integers(-1000, 1000)), max_size=40),
)
def test_alias_transparency_matches_single_variable(k, writes):
    heap = Heap()
    handles = [heap.alloc(IntContainer(0))]
    handles += [handles[0].copy() for _ in range(k - 1)]
    model = 0
    for which, value in writes:
        deref_mut(handles[which % k]).n = value
        model = value
        assert all(deref(h).n == model for h in handles)
    heap.close()


def test_interior_and_rooted_aliases_see_the_same_writes(heap):
    child = heap.alloc(Node("c"))
    parent = heap.alloc(Node("p", [child.copy()]))
    parent.children[0].label = "renamed"
    assert child.label == "renamed"


# -- storing into existing payloads ---------------------------------------------


def test_handle_stored_after_allocation_is_absorbed_at_quiescent_point(heap):
    parent = heap.alloc(Node("p"))
    child = heap.alloc(Node("c"))
    parent.children.append(child.copy())
    assert heap.root_count(child) == 1  # only `child` itself
    child.drop()
    assert heap.collect().records_reclaimed == 0
    parent.children.clear()
    assert heap.collect().records_reclaimed == 1


def test_collection_during_alloc_keeps_targets_of_borrowed_interior_handles():
    heap = Heap(threshold_bytes=100)
    child = heap.alloc(Node("child"), size=10)
    parent = heap.alloc(Node("parent", [child]), size=10)
    del child
    borrowed = parent.children[0]  # interior handle, not a root
    parent.drop()
    # the next allocation crosses the threshold and collects before inserting
    holder = heap.alloc(Node("holder", [borrowed]), size=200)
    assert heap.history[-1].trigger == "threshold"
    assert holder.children[0].label == "child"
    heap.close()


def test_interior_handle_outliving_its_container_is_detected(heap):
    child = heap.alloc(Node("child"))
    parent = heap.alloc(Node("parent", [child]))
    del child
    escaped = parent.children[0]
    parent.drop()
    heap.collect()
    with pytest.raises(DanglingHandleError):
        escaped.label


# -- confinement -------------------------------------------------------------------


def test_cross_thread_use_is_a_usage_error(heap):
    h = heap.alloc(IntContainer(1))
    errors = []

    def worker():
        for op in (lambda: deref(h), h.copy, lambda: heap.alloc(IntContainer(2)), heap.collect):
            try:
                op()
            except HandleUsageError as exc:
                errors.append(exc)

    t = threading.Thread(target=worker)
    t.start()
    t.join()
    assert len(errors) == 4
    assert len(heap) == 1


def test_handle_released_on_another_thread_is_settled_later(heap):
    h = heap.alloc(IntContainer(1))
    box = [h.copy()]

    t = threading.Thread(target=box.clear)
    t.start()
    t.join()
    assert heap.root_count(h) == 1


def test_finalizer_cannot_touch_other_handles(heap):
    seen = []
    other = heap.alloc(IntContainer(5))

    def finalize(payload):
        for attempt in (lambda: deref(other), other.copy, lambda: heap.alloc(IntContainer(0))):
            try:
                attempt()
            except CollectionInProgressError as exc:
                seen.append(type(exc))

    @traceable(finalize=finalize)
    @dataclass
    class Touchy:
        n: int

    heap.alloc(Touchy(1))
    delta = heap.collect()
    assert delta.records_reclaimed == 1
    assert seen == [CollectionInProgressError] * 3
    assert other.n == 5


def test_closed_heap_rejects_operations():
    heap = Heap()
    h = heap.alloc(IntContainer(1))
    heap.close()
    with pytest.raises(HandleUsageError):
        heap.alloc(IntContainer(2))
    with pytest.raises(DanglingHandleError):
        deref(h)
