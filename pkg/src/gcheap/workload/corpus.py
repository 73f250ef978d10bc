"""Turtle-campus integration corpus.

A campus keeps a list of turtles; each turtle keeps handles to its
children; the campus also caches name lookups.  All three views hold
handles to the same turtles, so a mutation through one must be visible
through the others.

Every scenario is written against a small reference adapter so it can run
either on the managed heap or on plain Python objects.  The plain run is
the model: a scenario's observation log must be identical under both.

Breeding averages the parents' walking speeds and takes the flavour from
the first parent and the colour from the second.  This is a deterministic
stand-in for a real genetics module.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, Optional

from gcheap.collector import Mode
from gcheap.handle import ManagedRef
from gcheap.heap import Heap, HeapConfig
from gcheap.tracing import traceable


@traceable
@dataclass(eq=False)
class Turtle:
    name: str
    walking_speed: int
    favorite_flavor: str
    favorite_color: str
    children: list[ManagedRef[Turtle]] = field(default_factory=list)
    lessons: int = 0

    def num_children(self) -> int:
        return len(self.children)

    def teach_children(self) -> None:
        for child in self.children:
            child.lessons += 1
            child.favorite_flavor = self.favorite_flavor


class Refs:
    """How turtles are referenced: through managed handles or plain objects."""

    name = "abstract"

    def new(self, turtle: Turtle) -> Any:
        raise NotImplementedError

    def share(self, ref: Any) -> Any:
        raise NotImplementedError

    def same(self, a: Any, b: Any) -> bool:
        raise NotImplementedError

    def collect(self) -> None:
        pass


class ManagedRefs(Refs):
    def __init__(self, heap: Heap) -> None:
        self.heap = heap
        self.name = f"managed/{heap.mode.value}"

    def new(self, turtle: Turtle) -> ManagedRef[Turtle]:
        return self.heap.alloc(turtle)

    def share(self, ref: ManagedRef[Turtle]) -> ManagedRef[Turtle]:
        return ref.copy()

    def same(self, a: ManagedRef, b: ManagedRef) -> bool:
        return a == b

    def collect(self) -> None:
        self.heap.collect()


class PlainRefs(Refs):
    name = "plain"

    def new(self, turtle: Turtle) -> Turtle:
        return turtle

    def share(self, ref: Turtle) -> Turtle:
        return ref

    def same(self, a: Turtle, b: Turtle) -> bool:
        return a is b


class Campus:
    def __init__(self, refs: Refs) -> None:
        self.refs = refs
        self._turtles: list[Any] = []
        self._name_cache: dict[str, list[Any]] = {}

    def size(self) -> int:
        return len(self._turtles)

    def add_turtle(self, turtle: Turtle) -> Any:
        ref = self.refs.new(turtle)
        self._turtles.append(ref)
        cached = self._name_cache.get(turtle.name)
        if cached is not None:
            cached.append(self.refs.share(ref))
        return self.refs.share(ref)

    def get_turtle(self, index: int) -> Any:
        return self.refs.share(self._turtles[index])

    def turtles(self) -> Iterator[Any]:
        for ref in self._turtles:
            yield self.refs.share(ref)

    def fastest_walker(self) -> Optional[Any]:
        if not self._turtles:
            return None
        fastest = max(self._turtles, key=lambda t: t.walking_speed)
        return self.refs.share(fastest)

    def breed_turtles(self, a: Any, b: Any, name: str) -> Any:
        child = Turtle(
            name=name,
            walking_speed=(a.walking_speed + b.walking_speed) // 2,
            favorite_flavor=a.favorite_flavor,
            favorite_color=b.favorite_color,
        )
        ref = self.add_turtle(child)
        a.children.append(self.refs.share(ref))
        b.children.append(self.refs.share(ref))
        return ref

    def turtles_with_name(self, name: str) -> list[Any]:
        cached = self._name_cache.get(name)
        if cached is None:
            cached = [self.refs.share(t) for t in self._turtles if t.name == name]
            self._name_cache[name] = cached
        return [self.refs.share(t) for t in cached]


def _populate(campus: Campus) -> list[Any]:
    specs = [
        ("Leo", 3, "kale", "blue"),
        ("Mikey", 7, "pizza", "orange"),
        ("Raph", 5, "lettuce", "red"),
        ("Leo", 4, "clover", "green"),
    ]
    return [campus.add_turtle(Turtle(*spec)) for spec in specs]


def _view(t: Any) -> tuple:
    return (t.name, t.walking_speed, t.favorite_flavor, t.favorite_color, t.lessons, len(t.children))


class ScenarioFailure(AssertionError):
    pass


def _check(condition: bool, message: str) -> None:
    if not condition:
        raise ScenarioFailure(message)


def scenario_empty_campus(refs: Refs, log: list) -> None:
    campus = Campus(refs)
    _check(campus.size() == 0, "new campus is not empty")
    _check(campus.fastest_walker() is None, "fastest_walker on an empty campus is not None")
    _check(list(campus.turtles()) == [], "empty campus yields turtles")
    log.append(("size", campus.size()))


def scenario_ownership(refs: Refs, log: list) -> None:
    campus = Campus(refs)
    _populate(campus)
    refs.collect()
    _check(campus.size() == 4, "size after four add_turtle calls")
    second = campus.get_turtle(1)
    _check(_view(second)[:4] == ("Mikey", 7, "pizza", "orange"), "get_turtle(1) returned the wrong turtle")
    names = [t.name for t in campus.turtles()]
    _check(names == ["Leo", "Mikey", "Raph", "Leo"], f"iteration order {names}")
    fastest = campus.fastest_walker()
    _check(fastest is not None and refs.same(fastest, second), "fastest walker is not Mikey")
    log.extend(("turtle", _view(t)) for t in campus.turtles())


def scenario_breeding(refs: Refs, log: list) -> None:
    campus = Campus(refs)
    leo, mikey, *_ = _populate(campus)
    before = (leo.num_children(), mikey.num_children())
    child = campus.breed_turtles(leo, mikey, "Splinter")
    del leo, mikey
    refs.collect()
    leo, mikey = campus.get_turtle(0), campus.get_turtle(1)
    _check(leo.num_children() == before[0] + 1, "first parent did not gain a child")
    _check(mikey.num_children() == before[1] + 1, "second parent did not gain a child")
    _check(refs.same(leo.children[-1], child), "child missing from first parent's children")
    _check(refs.same(mikey.children[-1], child), "child missing from second parent's children")
    _check(campus.size() == 5, "child not added to campus")
    _check(_view(child)[:4] == ("Splinter", 5, "kale", "orange"), f"bred child {_view(child)}")
    log.append(("child", _view(child)))
    log.append(("parents", _view(leo), _view(mikey)))


def scenario_three_way_aliasing(refs: Refs, log: list) -> None:
    campus = Campus(refs)
    leo, mikey, *_ = _populate(campus)
    child = campus.breed_turtles(leo, mikey, "Donnie")
    cached = campus.turtles_with_name("Donnie")
    _check(len(cached) == 1, "name cache missed the child")
    del child
    refs.collect()

    via_campus = campus.get_turtle(4)
    via_campus.walking_speed = 11
    via_campus.favorite_color = "purple"
    via_campus.name = "Donatello"

    via_parent = leo.children[0]
    via_other_parent = mikey.children[0]
    via_cache = campus.turtles_with_name("Donnie")[0]
    views = [_view(t) for t in (via_campus, via_parent, via_other_parent, via_cache, cached[0])]
    _check(all(v == views[0] for v in views), f"aliases disagree: {views}")
    _check(views[0][:4] == ("Donatello", 11, "kale", "purple"), f"mutation lost: {views[0]}")

    # and back the other way: write through the cache, read through the campus
    via_cache.walking_speed = 2
    refs.collect()
    _check(campus.get_turtle(4).walking_speed == 2, "write through cache not seen by campus")
    _check(campus.fastest_walker().name == "Mikey", "fastest walker after slowing the child")
    log.append(("aliases", views[0]))


def scenario_teaching(refs: Refs, log: list) -> None:
    campus = Campus(refs)
    leo, mikey, raph, _ = _populate(campus)
    a = campus.breed_turtles(leo, mikey, "April")
    b = campus.breed_turtles(leo, raph, "Casey")
    leo.teach_children()
    refs.collect()
    _check(leo.num_children() == 2, "leo should have two children")
    _check([t.lessons for t in (a, b)] == [1, 1], "children were not taught once")
    _check(a.favorite_flavor == "kale" and b.favorite_flavor == "kale", "flavour not taught")
    _check(mikey.children[0].lessons == 1, "lesson not visible through the other parent")
    log.append(("taught", _view(a), _view(b)))


def scenario_generations(refs: Refs, log: list) -> None:
    campus = Campus(refs)
    turtles = _populate(campus)
    for generation in range(6):
        a, b = turtles[-2], turtles[-1]
        turtles.append(campus.breed_turtles(a, b, f"gen{generation}"))
        refs.collect()
    del turtles
    refs.collect()
    names = [t.name for t in campus.turtles()]
    _check(campus.size() == 10, f"campus size {campus.size()}")
    _check(names[-1] == "gen5", "latest generation missing")
    counts = [t.num_children() for t in campus.turtles()]
    log.append(("generations", names, counts))


def scenario_temporaries(refs: Refs, log: list) -> None:
    campus = Campus(refs)
    _populate(campus)
    for i in range(20):
        scratch = refs.new(Turtle(f"tmp{i}", i, "none", "none"))
        scratch.children.append(campus.get_turtle(i % 4))
        del scratch
    refs.collect()
    _check(campus.size() == 4, "temporaries leaked into the campus")
    log.append(("speeds", [t.walking_speed for t in campus.turtles()]))


SCENARIOS: dict[str, Callable[[Refs, list], None]] = {
    "empty_campus": scenario_empty_campus,
    "ownership": scenario_ownership,
    "breeding": scenario_breeding,
    "three_way_aliasing": scenario_three_way_aliasing,
    "teaching": scenario_teaching,
    "generations": scenario_generations,
    "temporaries": scenario_temporaries,
}


@dataclass
class ScenarioResult:
    name: str
    mode: str
    passed: bool
    detail: str
    observations: list
    allocations: int
    reclaimed: int
    live: int
    elapsed: float

    def as_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "mode": self.mode,
            "passed": self.passed,
            "detail": self.detail,
            "allocations": self.allocations,
            "reclaimed": self.reclaimed,
            "live": self.live,
        }


def run_scenario(name: str, config: HeapConfig = HeapConfig()) -> ScenarioResult:
    """Run one scenario on a fresh heap and compare with the plain-object model."""
    scenario = SCENARIOS[name]
    model: list = []
    scenario(PlainRefs(), model)

    heap = config.make_heap()
    observed: list = []
    started = time.perf_counter()
    try:
        scenario(ManagedRefs(heap), observed)
        passed, detail = True, ""
        if observed != model:
            passed, detail = False, "observations differ from the plain-object model"
    except Exception as exc:
        passed, detail = False, f"{type(exc).__name__}: {exc}"
    elapsed = time.perf_counter() - started
    stats = heap.report()
    result = ScenarioResult(
        name=name,
        mode=Mode(config.mode).value,
        passed=passed,
        detail=detail,
        observations=observed,
        allocations=heap.state.records_allocated,
        reclaimed=stats.records_reclaimed,
        live=len(heap),
        elapsed=elapsed,
    )
    heap.close()
    return result


def run_corpus(
    modes: tuple[Mode, ...] = (Mode.NORMAL, Mode.NEVER_COLLECT),
) -> list[ScenarioResult]:
    results = []
    for mode in modes:
        for name in SCENARIOS:
            results.append(run_scenario(name, HeapConfig(mode=mode)))
    return results
