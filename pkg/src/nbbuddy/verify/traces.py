"""Single-threaded request traces and lock-step replay across implementations.

A trace is a list of ``("alloc", size)`` and ``("free", r)`` steps.  ``r``
picks the live grant ``r % len(live)`` in grant order, so one trace means
the same thing to every implementation as long as they agree.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from ..geometry import TreeConfig


def random_trace(cfg: TreeConfig, steps: int, seed: int, p_alloc: float = 0.55,
                 max_size: int | None = None) -> list[tuple[str, int]]:
    """Log-uniform request sizes up to ``max_size`` (default cfg.max_size)."""
    rng = random.Random(seed)
    top = (max_size or cfg.max_size).bit_length() - 1
    out = []
    for _ in range(steps):
        if rng.random() < p_alloc:
            k = rng.randint(0, top)
            lo = (1 << (k - 1)) + 1 if k else 1
            out.append(("alloc", rng.randint(lo, 1 << k)))
        else:
            out.append(("free", rng.getrandbits(30)))
    return out


def fill_drain_trace(cfg: TreeConfig, size: int | None = None, seed: int = 0) -> list[tuple[str, int]]:
    """Allocate until (and past) exhaustion, then release everything in shuffled order."""
    size = size or cfg.min_size
    count = cfg.total_memory // max(size, cfg.min_size)
    rng = random.Random(seed)
    frees = [("free", rng.getrandbits(30)) for _ in range(count)]
    return [("alloc", size)] * (count + 2) + frees


def replay(alloc, trace, hint: int = 0) -> list[int | None]:
    """Per-step outcomes: granted offset, None for exhausted, -1 for a free.

    Frees against an empty live set are skipped and recorded as -2.
    """
    live: list[int] = []
    out: list[int | None] = []
    for op, arg in trace:
        if op == "alloc":
            r = alloc.alloc(arg, hint)
            if r is None:
                out.append(None)
            else:
                live.append(r.offset)
                out.append(r.offset)
        elif live:
            alloc.free(live.pop(arg % len(live)))
            out.append(-1)
        else:
            out.append(-2)
    return out


@dataclass
class Divergence:
    step: int
    op: tuple
    outcomes: dict

    def __str__(self):
        got = ", ".join(f"{k}={v}" for k, v in self.outcomes.items())
        return f"step {self.step} {self.op}: {got}"


def differential_trace(trace, *allocs, hint: int = 0) -> Divergence | None:
    """Drive every allocator through ``trace`` in lock-step; report the first disagreement."""
    lives = [[] for _ in allocs]
    names = [getattr(a, "variant", type(a).__name__) for a in allocs]
    for step, (op, arg) in enumerate(trace):
        if op == "alloc":
            res = [a.alloc(arg, hint) for a in allocs]
            offs = [None if r is None else r.offset for r in res]
            if any(o != offs[0] for o in offs):
                return Divergence(step, (op, arg), dict(zip(names, offs)))
            if offs[0] is not None:
                for lv in lives:
                    lv.append(offs[0])
        elif lives[0]:
            k = arg % len(lives[0])
            for a, lv in zip(allocs, lives):
                a.free(lv.pop(k))
    return None
