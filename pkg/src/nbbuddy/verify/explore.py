"""Exhaustive interleaving exploration for small instances.

Depth-first over scheduling decisions.  Greenlets cannot be forked, so a
branch is explored by replaying its decision prefix on a fresh run.  Two
states with the same shared words, the same live grants and the same
suspended worker frames (code position and plain locals) have the same
future, so only one of them is expanded.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from ..geometry import TreeConfig
from .stepped import SteppedRun


@dataclass
class ExploreReport:
    variant: str
    programs: list
    states: int = 0
    terminals: int = 0
    replays: int = 0
    seconds: float = 0.0
    truncated: bool = False
    retries: int = 0
    unsafe: int = 0  # S1 broken or released memory not reusable
    stale_coal: int = 0  # exact-state mismatch confined to coalescing bits
    stale_occupancy: int = 0  # occupancy bits left on free subtrees
    failures: list = field(default_factory=list)  # (decisions, problems)

    @property
    def safe(self):
        return not self.unsafe and not self.truncated

    @property
    def ok(self):
        return not self.failures and not self.truncated


def explore(variant: str, cfg: TreeConfig, programs, setup=(), hints=None,
            max_states: int | None = None, stop_at_first: bool = False) -> ExploreReport:
    rep = ExploreReport(variant, programs)
    t0 = time.perf_counter()
    visited = set()
    stack: list[list[int]] = [[]]
    while stack:
        prefix = stack.pop()
        run = SteppedRun(variant, cfg, programs, setup, hints)
        for d in prefix:
            run.step(d)
        if prefix:
            rep.replays += 1
        while True:
            key = run.state_key()
            if key in visited:
                break
            visited.add(key)
            rep.states += 1
            if max_states is not None and rep.states >= max_states:
                rep.truncated = True
                stack.clear()
                break
            ready = run.runnable()
            if not ready:
                rep.terminals += 1
                rep.retries += run.retries
                fin = run.final_checks()
                if not fin:
                    if not fin.safe:
                        rep.unsafe += 1
                    kinds = {v.kind for v in (fin.final, fin.drained) if not v}
                    if "occupancy" in kinds:
                        rep.stale_occupancy += 1
                    elif kinds:
                        rep.stale_coal += 1
                    rep.failures.append((list(run.decisions), fin.problems()))
                    if stop_at_first:
                        stack.clear()
                break
            for tid in ready[1:]:
                stack.append(run.decisions + [tid])
            run.step(ready[0])
    rep.seconds = time.perf_counter() - t0
    return rep


# program suites used by the acceptance check: two threads, at most six operations
def small_programs(cfg: TreeConfig):
    leaf = cfg.min_size
    pair, quad = min(2 * leaf, cfg.max_size), min(4 * leaf, cfg.max_size)
    return [
        # two leaf churners racing on the same start node
        [[("alloc", leaf, "a"), ("free", "a"), ("alloc", leaf, "b")],
         [("alloc", leaf, "c"), ("free", "c"), ("alloc", leaf, "d")]],
        # release of a pre-granted buddy against fresh allocations of both sizes
        [[("free", "s0"), ("alloc", pair, "a"), ("free", "a")],
         [("alloc", leaf, "b"), ("alloc", pair, "c"), ("free", "b")]],
        # large against small: allocation failing mid-climb and reverting
        [[("alloc", quad, "a"), ("free", "a"), ("alloc", quad, "b")],
         [("alloc", leaf, "c"), ("alloc", leaf, "d"), ("free", "c")]],
        # both threads releasing siblings handed over from setup, then reallocating
        [[("free", "s0"), ("alloc", leaf, "a"), ("free", "a")],
         [("free", "s1"), ("alloc", pair, "b"), ("free", "b")]],
    ]


def small_setups(cfg: TreeConfig):
    leaf = cfg.min_size
    return [(), (("alloc", leaf, "s0"),), (), (("alloc", leaf, "s0"), ("alloc", leaf, "s1"))]
