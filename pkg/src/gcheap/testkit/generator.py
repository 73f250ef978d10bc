"""Seeded mutator workloads.

A workload is a flat list of :class:`Event`.  Handle variables and records
are small integers; the generator keeps its own model of which variable
holds which record and what each record's child list looks like, so every
event it emits is valid without consulting a heap.

Event arguments:

========  =========================================================
alloc     ``(var, record, nbytes, *child_vars)``
copy      ``(src_var, dst_var)``
load      ``(parent_var, index, dst_var)``: root a child handle
drop      ``(var,)``
link      ``(parent_var, child_var)``
unlink    ``(parent_var, index)``
collect   ``()``
audit     ``()``: compare root counts against the census
========  =========================================================
"""

from __future__ import annotations

import random
from dataclasses import dataclass

KINDS = ("alloc", "copy", "load", "drop", "link", "unlink", "collect", "audit")


@dataclass(frozen=True)
class Event:
    kind: str
    args: tuple[int, ...] = ()

    def __str__(self) -> str:
        return " ".join([self.kind, *map(str, self.args)])


def generate_workload(
    seed: int,
    size: int,
    mutation_steps: int,
    *,
    cycle_probability: float = 0.1,
    collect_probability: float = 0.02,
    audits: int = 0,
    max_children: int = 6,
    min_bytes: int = 16,
    max_bytes: int = 2048,
) -> list[Event]:
    """Deterministic workload for ``seed``.

    ``size`` is the target number of live handle variables.  With
    ``size == 0`` the workload only collects.  ``audits`` audit events are
    placed at distinct random steps.
    """
    if size < 0:
        raise ValueError("size must be non-negative")
    rng = random.Random(seed)
    events: list[Event] = []
    audit_steps = set(rng.sample(range(mutation_steps), min(audits, mutation_steps)))

    if size == 0:
        for step in range(mutation_steps):
            events.append(Event("collect"))
            if step in audit_steps:
                events.append(Event("audit"))
        return events

    holds: dict[int, int] = {}  # var -> record
    children: dict[int, list[int]] = {}  # record -> child records
    var_list: list[int] = []  # for O(1) random choice
    next_var = 0
    next_record = 0

    def new_var(record: int) -> int:
        nonlocal next_var
        var = next_var
        next_var += 1
        holds[var] = record
        var_list.append(var)
        return var

    def pick() -> int:
        return rng.choice(var_list)

    def link(parent_var: int, child_var: int) -> None:
        children[holds[parent_var]].append(holds[child_var])
        events.append(Event("link", (parent_var, child_var)))

    for step in range(mutation_steps):
        if rng.random() < collect_probability:
            events.append(Event("collect"))
        else:
            n = len(var_list)
            if n == 0:
                kind = "alloc"
            else:
                kind = rng.choices(
                    ("alloc", "copy", "load", "drop", "link", "unlink"),
                    weights=(
                        3.0 if n < size else 0.5,
                        0.5 if n < size else 0.1,
                        1.5,
                        3.5 if n >= size else 1.5,
                        2.0,
                        1.0,
                    ),
                )[0]

            if kind == "alloc":
                record = next_record
                next_record += 1
                kids = []
                if var_list and rng.random() < 0.3:
                    kids = [pick() for _ in range(rng.randint(1, 2))]
                children[record] = [holds[k] for k in kids]
                nbytes = rng.randint(min_bytes, max_bytes)
                var = new_var(record)
                events.append(Event("alloc", (var, record, nbytes, *kids)))
            elif kind == "copy":
                src = pick()
                dst = new_var(holds[src])
                events.append(Event("copy", (src, dst)))
            elif kind == "load":
                parent = pick()
                kids = children[holds[parent]]
                if kids:
                    index = rng.randrange(len(kids))
                    dst = new_var(kids[index])
                    events.append(Event("load", (parent, index, dst)))
            elif kind == "drop":
                position = rng.randrange(len(var_list))
                var = var_list[position]
                var_list[position] = var_list[-1]
                var_list.pop()
                del holds[var]
                events.append(Event("drop", (var,)))
            elif kind == "link":
                parent, child = pick(), pick()
                if len(children[holds[parent]]) < max_children:
                    link(parent, child)
                    if (
                        rng.random() < cycle_probability
                        and len(children[holds[child]]) < max_children
                    ):
                        link(child, parent)
            elif kind == "unlink":
                parent = pick()
                kids = children[holds[parent]]
                if kids:
                    index = rng.randrange(len(kids))
                    kids.pop(index)
                    events.append(Event("unlink", (parent, index)))

        if step in audit_steps:
            events.append(Event("audit"))
    return events
