"""Safety and progress checking for the allocators.

Sequential reference and live-set checkers, concurrent stress, and a
greenlet-driven interleaving controller for exhaustive and solo-progress
runs on small trees.
"""

from .checks import (
    Grant,
    GrantRegistry,
    LiveSet,
    Verdict,
    check_grant,
    check_quiescent,
    check_reuse,
    check_s1,
    expected_snapshot,
)
from .explore import ExploreReport, explore, small_programs, small_setups
from .oracle import SequentialOracle, expected_bunch_words, expected_tree
from .progress import Scenario, scenarios, solo_progress
from .stepped import SteppedRun, SteppedWords, dump_schedule, load_schedule
from .stress import SafetyViolation, StressConfig, StressReport, stress
from .traces import differential_trace, fill_drain_trace, random_trace, replay

__all__ = [
    "ExploreReport", "Grant", "GrantRegistry", "LiveSet", "SafetyViolation", "Scenario",
    "SequentialOracle", "SteppedRun", "SteppedWords", "StressConfig", "StressReport", "Verdict",
    "check_grant", "check_quiescent", "check_reuse", "check_s1", "differential_trace",
    "dump_schedule", "expected_bunch_words", "expected_snapshot", "expected_tree", "explore",
    "fill_drain_trace", "load_schedule", "random_trace", "replay", "scenarios",
    "small_programs", "small_setups", "solo_progress", "stress",
]
