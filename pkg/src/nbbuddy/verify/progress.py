"""Solo-progress checks: freeze every thread but one, the survivor must finish.

A scenario runs a few threads under a seeded random interleaving until the
victim threads reach an eligible freeze point (a scripted race window, or
any access for the random family).  The victims are then frozen for good and
only the survivor is scheduled.  Its in-flight operation and every later
operation must each complete within ``c * (depth + 2**level)`` accesses.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable

from ..geometry import COAL_LEFT, COAL_RIGHT, TreeConfig, target_level
from ..packed import RANGE_COAL
from .stepped import SteppedRun

STEP_CONSTANT = 16


@dataclass
class Scenario:
    name: str
    depth: int
    programs: list
    victims: tuple
    solo: int
    eligible: Callable[[SteppedRun, int], bool]
    setup: tuple = ()
    hints: list | None = None
    freeze_p: float = 0.5  # chance of freezing at each eligible point


@dataclass
class ScheduleOutcome:
    seed: int
    decisions: list
    frozen_at: int | None = None  # decision index of the freeze, None if never reached
    op_steps: list = field(default_factory=list)
    budgets: list = field(default_factory=list)
    stuck: bool = False
    retries: int = 0
    witness_failures: list = field(default_factory=list)
    safety: list = field(default_factory=list)


@dataclass
class ProgressReport:
    scenario: str
    variant: str
    schedules: int = 0
    attempts: int = 0
    stuck: list = field(default_factory=list)  # ScheduleOutcome
    worst_ratio: float = 0.0  # max steps / budget over all checked operations
    retries: int = 0
    witness_failures: list = field(default_factory=list)
    safety: list = field(default_factory=list)

    @property
    def ok(self):
        return (not self.stuck and not self.witness_failures and not self.safety
                and self.schedules > 0)


def budget(cfg: TreeConfig, op, labels, c: int = STEP_CONSTANT) -> int:
    if op[0] == "alloc":
        level = target_level(op[1], cfg)
    else:
        g = labels.get(op[1])
        level = target_level(g.size, cfg) if g else cfg.depth
    return c * (cfg.depth + (1 << level))


def _coal_mask(run: SteppedRun) -> int:
    return RANGE_COAL[1] if run.variant.startswith("4lvl") else COAL_LEFT | COAL_RIGHT


def run_scenario(scn: Scenario, variant: str, seed: int, c: int = STEP_CONSTANT,
                 freeze: bool = True) -> ScheduleOutcome:
    cfg = TreeConfig.with_depth(scn.depth)
    rng = random.Random(seed)
    run = SteppedRun(variant, cfg, scn.programs, scn.setup, scn.hints)
    out = ScheduleOutcome(seed, run.decisions)
    solo = run.threads[scn.solo]
    while freeze:
        ready = run.runnable()
        if not ready or solo.done:
            break
        if all(not run.threads[v].done for v in scn.victims) and \
                all(scn.eligible(run, v) for v in scn.victims) and rng.random() < scn.freeze_p:
            run.freeze(scn.victims)
            out.frozen_at = len(run.decisions) - 1
            break
        run.step(rng.choice(ready))
    if freeze and out.frozen_at is None:
        out.retries = run.retries
        out.witness_failures = list(run.witness_failures)
        return out
    # the survivor gets one extra full operation pair to prove it keeps going
    solo.program += [("alloc", cfg.min_size, "_probe"), ("free", "_probe")]
    while not solo.done:
        k = solo.op_index
        limit = budget(cfg, solo.program[k], run.labels, c)
        start = solo.steps
        while not solo.done and solo.op_index == k:
            run.step(scn.solo if freeze else rng.choice(run.runnable()))
            if solo.steps - start > limit:
                out.stuck = True
                break
        out.op_steps.append(solo.steps - start)
        out.budgets.append(limit)
        if out.stuck:
            break
    if not freeze:
        while run.runnable():
            run.step(rng.choice(run.runnable()))
    out.retries = run.retries
    out.witness_failures = list(run.witness_failures)
    out.safety = list(run.violations)
    return out


def solo_progress(scn: Scenario, variant: str, schedules: int = 100, seed: int = 0,
                  c: int = STEP_CONSTANT, max_attempts: int | None = None) -> ProgressReport:
    """Collect ``schedules`` random schedules that reach the scenario's freeze window."""
    rep = ProgressReport(scn.name, variant)
    max_attempts = max_attempts or schedules * 50
    s = seed
    while rep.schedules < schedules and rep.attempts < max_attempts:
        out = run_scenario(scn, variant, s, c)
        s += 1
        rep.attempts += 1
        rep.retries += out.retries
        rep.witness_failures += out.witness_failures
        if out.frozen_at is None:
            continue
        rep.schedules += 1
        rep.safety += out.safety
        if out.stuck:
            rep.stuck.append(out)
        for n, b in zip(out.op_steps, out.budgets):
            rep.worst_ratio = max(rep.worst_ratio, n / b if b else float("inf"))
    return rep


# scripted race windows ------------------------------------------------------------

def _climb_cas_on_coal(run, v):
    # allocator about to CAS an ancestor (not its own target) whose coalescing bits are set
    t = run.threads[v]
    acc = t.pending
    return (acc is not None and acc.func == "try_alloc" and acc.kind == "cas"
            and acc.array != run.index_aid and t.last is not None and t.last.kind == "load"
            and run.pending_word(v) & _coal_mask(run) != 0)


def _after_release(run, v):
    # freer has just made its node free again and has not started unmarking
    t = run.threads[v]
    last = t.last
    if last is None or not t.last_ok:
        return False
    return (last.func, last.kind) in (("free_node", "store"), ("_release", "cas"))


def _unmark_cas(run, v):
    acc = run.threads[v].pending
    return acc is not None and acc.func == "unmark" and acc.kind == "cas"


def _phase1_cas(run, v):
    acc = run.threads[v].pending
    return acc is not None and acc.func == "free_node" and acc.kind == "cas"


def _anywhere(run, v):
    return run.threads[v].pending is not None


def scenarios(depth: int = 5) -> list[Scenario]:
    """Scripted families plus a random one; depth 5 spans two bunch levels when packed."""
    leaf, pair = 8, 16
    return [
        Scenario("alloc-frozen-mid-climb", depth,
                 [[("alloc", leaf, "a"), ("free", "a")],
                  [("free", "s0"), ("alloc", leaf, "x"), ("free", "x")]],
                 victims=(0,), solo=1, eligible=_climb_cas_on_coal,
                 setup=(("alloc", leaf, "s0"),), hints=[0, 0]),
        Scenario("free-frozen-before-unmark", depth,
                 [[("free", "s0"), ("alloc", leaf, "a")],
                  [("alloc", leaf, "x"), ("alloc", pair, "y"), ("free", "x")]],
                 victims=(0,), solo=1, eligible=_after_release,
                 setup=(("alloc", leaf, "s0"), ("alloc", leaf, "s1")), freeze_p=1.0),
        Scenario("unmark-vs-clean-coal", depth,
                 [[("free", "s0"), ("alloc", leaf, "a")],
                  [("free", "s1"), ("alloc", leaf, "x"), ("free", "x")]],
                 victims=(0,), solo=1, eligible=_unmark_cas,
                 setup=(("alloc", leaf, "s0"), ("alloc", leaf, "s1"))),
        Scenario("freer-stopped-at-busy-buddy", depth,
                 [[("free", "s0"), ("alloc", pair, "a")],
                  [("free", "s1"), ("alloc", pair, "x"), ("free", "x")]],
                 victims=(0,), solo=1, eligible=_phase1_cas,
                 setup=(("alloc", leaf, "s0"), ("alloc", leaf, "s1"))),
        Scenario("random", depth,
                 [[("alloc", leaf, "a"), ("free", "a"), ("alloc", pair, "b")],
                  [("alloc", pair, "c"), ("free", "s0"), ("free", "c")],
                  [("alloc", leaf, "d"), ("alloc", leaf, "e"), ("free", "d")]],
                 victims=(0, 2), solo=1, eligible=_anywhere,
                 setup=(("alloc", leaf, "s0"),), freeze_p=0.05),
    ]
