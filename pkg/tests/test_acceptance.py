"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
"""

import doctest
import random
import time
from collections import Counter
from dataclasses import make_dataclass
from typing import Optional

import pytest

import gcheap.two_references
from gcheap import Heap, HeapConfig, ManagedRef, Mode, trace_handles, traceable
from gcheap.testkit import interior_handles, run_fuzz
from gcheap.workload import SCENARIOS, bundled_script, parse_script, run_corpus, run_workload

pytestmark = pytest.mark.acceptance

CAMPAIGN_SEEDS = range(100)
CAMPAIGN_STEPS = 10_000
CAMPAIGN_NODES = 50
AUDITS_PER_WORKLOAD = 10
# small enough that allocation-triggered collections happen inside the campaign
CAMPAIGN_CONFIG = HeapConfig(threshold_bytes=16 * 1024)


@pytest.fixture(scope="module")
def campaign():
    started = time.perf_counter()
    results = [
        run_fuzz(
            seed,
            CAMPAIGN_STEPS,
            CAMPAIGN_NODES,
            verify=True,
            config=CAMPAIGN_CONFIG,
            audits=AUDITS_PER_WORKLOAD,
        )
        for seed in CAMPAIGN_SEEDS
    ]
    return results, time.perf_counter() - started


def test_two_aliases_read_the_same_write(acceptance_log):
    started = time.perf_counter()
    outcome = doctest.testmod(gcheap.two_references)
    c1, c2 = gcheap.two_references.make_two_references(Heap())
    values = (c1.n, c2.n)
    elapsed = time.perf_counter() - started
    passed = outcome.failed == 0 and outcome.attempted > 0 and values == (43, 43) and elapsed < 1.0
    acceptance_log("1 two-alias read-back", passed, f"reads={values}, {elapsed:.3f}s")
    assert outcome.failed == 0 and outcome.attempted > 0
    assert values == (43, 43)
    assert elapsed < 1.0


def test_soundness_campaign(campaign, acceptance_log):
    results, elapsed = campaign
    bad = [(r.seed, str(v)) for r in results for v in r.violations_of("soundness")]
    crashes = [(r.seed, str(v)) for r in results for v in r.violations_of("crash")]
    verified = sum(r.verified_collections for r in results)
    threshold = sum(r.threshold_collections for r in results)
    cycles = sum(r.cycle_collections for r in results)
    passed = not bad and not crashes and elapsed < 60 and cycles > 0 and threshold > 0
    acceptance_log(
        "2 soundness campaign",
        passed,
        f"{len(results)} workloads, {verified} collections verified, "
        f"{threshold} threshold-triggered, {cycles} reclaimed cycles, {elapsed:.1f}s",
    )
    assert not bad, bad[:5]
    assert not crashes, crashes[:5]
    assert cycles > 0 and threshold > 0
    assert elapsed < 60


def test_completeness(campaign, acceptance_log):
    results, _ = campaign
    bad = [(r.seed, str(v)) for r in results for v in r.violations_of("completeness")]
    verified = sum(r.verified_collections for r in results)
    acceptance_log("3 completeness", not bad and verified > 0, f"{verified} collections")
    assert verified > 0
    assert not bad, bad[:5]


def test_two_node_cycle(acceptance_log):
    report = run_workload(parse_script(bundled_script("cycle")), HeapConfig(), verify=True)
    reclaimed = [c["records_reclaimed"] for c in report.collections]
    passed = report.ok and reclaimed == [2]
    acceptance_log("4 two-node cycle", passed, f"per-collection reclaimed={reclaimed}")
    assert report.ok, report.failures
    assert reclaimed == [2]


def test_finalize_once(campaign, acceptance_log):
    results, _ = campaign
    bad = [(r.seed, str(v)) for r in results for v in r.violations_of("finalize-once")]
    max_count = max((max(r.finalize_counts.values(), default=0) for r in results), default=0)
    totals_match = all(r.stats.finalizers_run == r.stats.records_reclaimed for r in results)
    finalized = sum(r.stats.finalizers_run for r in results)
    passed = not bad and max_count <= 1 and totals_match and finalized > 0
    acceptance_log("5 finalize once", passed, f"{finalized} finalizers, max per record {max_count}")
    assert not bad, bad[:5]
    assert max_count <= 1
    assert totals_match
    assert finalized > 0


def test_never_collect_parity(acceptance_log):
    results = run_corpus((Mode.NORMAL, Mode.NEVER_COLLECT))
    by_mode = {mode.value: {r.name: r for r in results if r.mode == mode.value} for mode in Mode}
    normal, never = by_mode["normal"], by_mode["never_collect"]
    failures = [f"{r.mode}/{r.name}: {r.detail}" for r in results if not r.passed]
    differ = [n for n in SCENARIOS if normal[n].observations != never[n].observations]
    leaky = [n for n, r in never.items() if r.reclaimed != 0 or r.live != r.allocations]
    fuzz = run_fuzz(0, 2000, 30, config=HeapConfig(mode=Mode.NEVER_COLLECT))
    fuzz_ok = fuzz.ok and fuzz.stats.records_reclaimed == 0
    fuzz_ok = fuzz_ok and fuzz.stats.records_live_after_last == fuzz.allocations
    passed = not failures and not differ and not leaky and fuzz_ok
    acceptance_log("6 never-collect parity", passed, f"{len(SCENARIOS)} scenarios x 2 modes")
    assert not failures, failures
    assert not differ, differ
    assert not leaky, leaky
    assert fuzz_ok, fuzz.violations[:5]


def test_root_exactness(campaign, acceptance_log):
    results, _ = campaign
    audits = sum(r.audits for r in results)
    bad = [(r.seed, str(v)) for r in results for v in r.violations_of("root-exactness")]
    passed = audits == 1000 and not bad
    acceptance_log("7 root exactness", passed, f"{audits} audits")
    assert audits == 1000
    assert not bad, bad[:5]


def test_corpus(acceptance_log):
    started = time.perf_counter()
    results = run_corpus((Mode.NORMAL,))
    elapsed = time.perf_counter() - started
    names = {r.name for r in results if r.passed}
    passed = names == set(SCENARIOS) and "three_way_aliasing" in names and elapsed < 5
    acceptance_log("8 turtle-campus corpus", passed, f"{len(names)}/{len(SCENARIOS)}, {elapsed:.2f}s")
    assert [r.detail for r in results if not r.passed] == []
    assert "three_way_aliasing" in names
    assert elapsed < 5


# -- randomized aggregate shapes ------------------------------------------------------


@traceable
class Target:
    pass


def _random_shape(rng: random.Random, index: int, earlier: list[type]):
    """A fresh traceable dataclass plus a factory that fills it with handles."""
    kinds = ["int", "str", "ref", "optional", "list", "tuple", "dict"]
    if earlier:
        kinds += ["nested", "nested_list"]
    fields, makers = [], []
    for position in range(rng.randint(1, 6)):
        kind = rng.choice(kinds)
        name = f"f{position}_{kind}"
        if kind == "int":
            fields.append((name, int))
            makers.append(lambda pick: 7)
        elif kind == "str":
            fields.append((name, str))
            makers.append(lambda pick: "s")
        elif kind == "ref":
            fields.append((name, ManagedRef))
            makers.append(lambda pick: pick())
        elif kind == "optional":
            fields.append((name, Optional[ManagedRef]))
            makers.append(lambda pick: pick() if rng.random() < 0.5 else None)
        elif kind == "list":
            fields.append((name, list[ManagedRef]))
            makers.append(lambda pick: [pick() for _ in range(rng.randint(0, 4))])
        elif kind == "tuple":
            fields.append((name, tuple[ManagedRef, ...]))
            makers.append(lambda pick: tuple(pick() for _ in range(rng.randint(0, 3))))
        elif kind == "dict":
            fields.append((name, dict[str, ManagedRef]))
            makers.append(lambda pick: {f"k{i}": pick() for i in range(rng.randint(0, 3))})
        else:
            inner_cls, inner_make = rng.choice(earlier)
            if kind == "nested":
                fields.append((name, inner_cls))
                makers.append(lambda pick, m=inner_make: m(pick))
            else:
                fields.append((name, list[inner_cls]))
                makers.append(
                    lambda pick, m=inner_make: [m(pick) for _ in range(rng.randint(0, 2))]
                )
    cls = traceable(make_dataclass(f"Shape{index}", fields, eq=False))

    def make(pick):
        return cls(*(m(pick) for m in makers))

    return cls, make


def test_derived_trace_matches_structure(acceptance_log):
    rng = random.Random(2024)
    heap = Heap()
    targets = [heap.alloc(Target()) for _ in range(8)]
    shapes: list = []
    mismatches = []
    for index in range(50):
        cls, make = _random_shape(rng, index, shapes)
        shapes.append((cls, make))
        value = make(lambda: rng.choice(targets))
        derived = Counter(h.address for h in trace_handles(value))
        truth = Counter(h.address for h in interior_handles(value))
        if derived != truth:
            mismatches.append(cls.__name__)
    heap.close()
    acceptance_log("9 derived trace soundness", not mismatches, f"50 shapes, {len(mismatches)} mismatched")
    assert not mismatches

