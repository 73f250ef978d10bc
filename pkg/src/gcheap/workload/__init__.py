"""Scripted mutator workloads, the turtle-campus corpus, and their reports."""

from importlib import resources

from gcheap.workload.corpus import SCENARIOS, Campus, Turtle, run_corpus, run_scenario
from gcheap.workload.runner import StatsReport, run_workload, strip_durations
from gcheap.workload.script import (
    Directive,
    ScriptBuilder,
    ScriptError,
    WorkloadScript,
    load_script,
    parse_script,
)


def bundled_script(name: str) -> str:
    """Text of one of the scripts shipped in ``gcheap/workload/scripts``."""
    return resources.files("gcheap.workload").joinpath("scripts", f"{name}.gcw").read_text("utf-8")


__all__ = [
    "SCENARIOS",
    "Campus",
    "Directive",
    "ScriptBuilder",
    "ScriptError",
    "StatsReport",
    "Turtle",
    "WorkloadScript",
    "bundled_script",
    "load_script",
    "parse_script",
    "run_corpus",
    "run_scenario",
    "run_workload",
    "strip_durations",
]
