"""Brute-force reachability oracle.

The shadow graph is fed the same events a workload performs on the heap
(allocations, handle copies and drops, links and unlinks) and never looks
inside the collector.  Agreement between the two is the check.
"""

from __future__ import annotations

import dataclasses
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable

from gcheap.handle import ManagedRef


@dataclass
class ShadowGraph:
    nodes: set[int] = field(default_factory=set)
    # ordered, with repeats, mirroring each payload's child list
    edges: dict[int, list[int]] = field(default_factory=dict)
    roots: Counter = field(default_factory=Counter)

    def alloc(self, node: int, children: Iterable[int] = ()) -> None:
        if node in self.nodes:
            raise ValueError(f"node {node} allocated twice")
        self.nodes.add(node)
        self.edges[node] = list(children)
        self.roots[node] += 1

    def copy(self, node: int) -> None:
        self.roots[node] += 1

    def drop(self, node: int) -> None:
        if self.roots[node] <= 0:
            raise ValueError(f"node {node} has no root to drop")
        self.roots[node] -= 1
        if not self.roots[node]:
            del self.roots[node]

    def link(self, parent: int, child: int) -> None:
        self.edges[parent].append(child)

    def unlink(self, parent: int, index: int) -> int:
        return self.edges[parent].pop(index)

    def remove(self, nodes: Iterable[int]) -> None:
        for node in nodes:
            self.nodes.discard(node)
            self.edges.pop(node, None)

    def root_census(self) -> dict[int, int]:
        return {node: count for node, count in self.roots.items() if count > 0}


def reachable(graph: ShadowGraph) -> set[int]:
    """Fixed point of edge-following from every rooted node."""
    seen = {node for node, count in graph.roots.items() if count > 0}
    frontier = list(seen)
    while frontier:
        node = frontier.pop()
        for child in graph.edges.get(node, ()):
            if child not in seen:
                seen.add(child)
                frontier.append(child)
    return seen


def unreachable(graph: ShadowGraph) -> set[int]:
    return graph.nodes - reachable(graph)


def has_cycle(graph: ShadowGraph, within: set[int]) -> bool:
    """True if the subgraph induced by ``within`` contains a directed cycle."""
    WHITE, GREY, BLACK = 0, 1, 2
    colour = dict.fromkeys(within, WHITE)
    for start in within:
        if colour[start] != WHITE:
            continue
        colour[start] = GREY
        stack = [(start, iter(graph.edges.get(start, ())))]
        while stack:
            node, children = stack[-1]
            for child in children:
                if child not in colour:
                    continue
                if colour[child] == GREY:
                    return True
                if colour[child] == WHITE:
                    colour[child] = GREY
                    stack.append((child, iter(graph.edges.get(child, ()))))
                    break
            else:
                colour[node] = BLACK
                stack.pop()
    return False


def interior_handles(value: Any) -> list[ManagedRef]:
    """Handles inside ``value`` found by walking its runtime structure.

    This deliberately ignores annotations and trace hooks so it can serve
    as ground truth for derived tracers.
    """
    if isinstance(value, ManagedRef):
        return [value]
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        found = []
        for f in dataclasses.fields(value):
            found.extend(interior_handles(getattr(value, f.name)))
        return found
    if isinstance(value, dict):
        found = []
        for key, item in value.items():
            found.extend(interior_handles(key))
            found.extend(interior_handles(item))
        return found
    if isinstance(value, (list, tuple, set, frozenset)):
        found = []
        for item in value:
            found.extend(interior_handles(item))
        return found
    return []
