"""Independent oracle, workload generator and replay driver for verifying the collector."""

from gcheap.testkit.driver import FuzzNode, FuzzResult, Violation, replay, run_fuzz
from gcheap.testkit.generator import Event, generate_workload
from gcheap.testkit.oracle import ShadowGraph, has_cycle, interior_handles, reachable, unreachable

__all__ = [
    "Event",
    "FuzzNode",
    "FuzzResult",
    "ShadowGraph",
    "Violation",
    "generate_workload",
    "has_cycle",
    "interior_handles",
    "reachable",
    "replay",
    "run_fuzz",
    "unreachable",
]
