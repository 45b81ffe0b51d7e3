"""Concurrent churn with continuous disjointness checks and a drained-state check."""

from __future__ import annotations

import random
import threading
import time
from dataclasses import dataclass, field

from ..geometry import OCC, TreeConfig
from ..packed import PackedBuddy, slot_shift
from ..variants import make_allocator
from .checks import Grant, GrantRegistry, check_quiescent, check_reuse


class SafetyViolation(AssertionError):
    def __init__(self, message: str, seed: int):
        super().__init__(f"{message} (reproduce with seed {seed})")
        self.seed = seed


@dataclass
class StressConfig:
    variant: str = "1lvl-nb"
    threads: int = 8
    ops: int = 100_000  # per thread
    min_size: int = 8
    max_size: int = 1024
    total_memory: int = 16384
    seed: int = 0
    p_alloc: float = 0.5
    inject_fault: bool = False
    duration: float | None = None  # seconds; overrides ops when set


@dataclass
class StressReport:
    config: StressConfig
    ops: int = 0
    grants: int = 0
    exhausted: int = 0
    cas_failures: int = 0
    seconds: float = 0.0
    misaligned: int = 0
    violations: list[str] = field(default_factory=list)
    quiescent_ok: bool = False
    quiescent_detail: str = ""
    reuse_ok: bool = False

    @property
    def ok(self):
        return not self.violations and self.quiescent_ok and self.reuse_ok and not self.misaligned


def corrupt_free_word(alloc, rng) -> str:
    """Set a stray OCC bit on some currently free leaf-level status slot."""
    inner = getattr(alloc, "inner", alloc)
    cfg = inner.cfg
    first = 1 << cfg.depth
    for _ in range(10_000):
        n = rng.randrange(first, 2 * first)
        if isinstance(inner, PackedBuddy):
            b, sh = inner.node_bunch[n], slot_shift(inner.node_pos[n])
            w = inner.bunches.w[b]
            if not (w >> sh) & 0x1F and inner.bunches.cas(b, w, w | (OCC << sh)) == w:
                return f"stray OCC on node {n}"
        elif inner.tree.cas(n, 0, OCC) == 0:
            return f"stray OCC on node {n}"
    return "no free word to corrupt"


def _sizes(rng, lo, hi):
    ks = range(lo.bit_length() - 1, hi.bit_length())
    while True:
        k = rng.choice(ks)
        yield rng.randint((1 << k) // 2 + 1, 1 << k) if k else 1


def stress(cfg: StressConfig) -> StressReport:
    """Run ``cfg.threads`` workers doing random alloc/free, drain, then check.

    Each grant is claimed in a shared registry the moment ``alloc`` returns
    and released just before ``free`` is called, so overlapping live grants
    are caught as they happen.  Raises SafetyViolation on any failure.
    """
    tree = TreeConfig(cfg.total_memory, cfg.min_size)
    alloc = make_allocator(cfg.variant, tree)
    registry = GrantRegistry(tree)
    report = StressReport(cfg)
    start = threading.Barrier(cfg.threads + 1)
    lock = threading.Lock()
    deadline = [None]
    fault_rng = random.Random(cfg.seed ^ 0xFA17)

    def worker(tid):
        rng = random.Random((cfg.seed << 8) | tid)
        sizes = _sizes(rng, cfg.min_size, cfg.max_size)
        live: list[Grant] = []
        ops = grants = exhausted = misaligned = 0
        start.wait()
        while True:
            if cfg.duration is None:
                if ops >= cfg.ops:
                    break
            elif time.perf_counter() >= deadline[0]:
                break
            if tid == 0 and cfg.inject_fault and ops == cfg.ops // 2:
                corrupt_free_word(alloc, fault_rng)
            ops += 1
            if not live or rng.random() < cfg.p_alloc:
                req = next(sizes)
                r = alloc.alloc(req)
                if r is None:
                    exhausted += 1
                    continue
                g = Grant(r.offset, r.size, req, r.node)
                grants += 1
                if r.offset % r.size:
                    misaligned += 1
                if not registry.claim(g):
                    break
                live.append(g)
            else:
                g = live.pop(rng.randrange(len(live)))
                registry.release(g)
                alloc.free(g.offset)
        for g in live:
            registry.release(g)
            alloc.free(g.offset)
        with lock:
            report.ops += ops
            report.grants += grants
            report.exhausted += exhausted
            report.misaligned += misaligned

    workers = [threading.Thread(target=worker, args=(t,), daemon=True) for t in range(cfg.threads)]
    for t in workers:
        t.start()
    t0 = time.perf_counter()
    if cfg.duration is not None:
        deadline[0] = t0 + cfg.duration
    start.wait()
    for t in workers:
        t.join()
    report.seconds = time.perf_counter() - t0
    report.cas_failures = alloc.counters()["cas_failures"]
    report.violations = list(registry.violations)
    v = check_quiescent(alloc.snapshot(), [], alloc)
    report.quiescent_ok, report.quiescent_detail = v.ok, v.detail
    reuse = check_reuse(alloc)
    report.reuse_ok = reuse.ok
    if report.violations:
        raise SafetyViolation(report.violations[0], cfg.seed)
    if report.misaligned:
        raise SafetyViolation(f"{report.misaligned} misaligned grants", cfg.seed)
    if not v:
        raise SafetyViolation(f"tree not clean after drain: {v.detail}", cfg.seed)
    if not reuse:
        raise SafetyViolation(reuse.detail, cfg.seed)
    return report
