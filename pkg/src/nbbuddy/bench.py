"""Multi-threaded allocation workloads and their CSV reports.

An "op" in every report is one completed alloc/free pair: a chunk granted
and later released by the driver.  Allocation attempts that come back
exhausted are counted separately and are not ops.
"""

from __future__ import annotations

import csv
import os
import queue
import random
import threading
import time
from dataclasses import dataclass, field

from .geometry import ConfigError, TreeConfig
from .variants import VARIANTS, make_allocator

WORKLOADS = ("linux-scalability", "thread-test", "larson", "constant-occupancy")
CSV_HEADER = ("workload", "variant", "threads", "size_bytes", "ops", "seconds",
              "throughput_ops_s", "cas_retries", "exhausted")


@dataclass
class BenchConfig:
    workload: str = "linux-scalability"
    variant: str = "1lvl-nb"
    threads: int = 1
    size: int = 8
    ops: int | None = None  # workload default when None
    duration: float | None = None  # seconds; larson only
    min_size: int = 8
    max_size: int = 16384
    total_memory: int = 1 << 20
    seed: int = 0
    pin: bool = False
    touch: bool = False
    record: bool = False  # keep per-thread request traces in the report

    def __post_init__(self):
        if self.workload not in WORKLOADS:
            raise ConfigError(f"unknown workload {self.workload!r}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if not self.min_size <= self.size <= self.max_size:
            raise ConfigError(f"size {self.size} outside [{self.min_size}, {self.max_size}]")
        if self.ops is not None and self.ops < 0:
            raise ConfigError("ops must be >= 0")
        if self.duration is not None and self.duration < 0:
            raise ConfigError("duration must be >= 0")

    def tree(self) -> TreeConfig:
        return TreeConfig(self.total_memory, self.min_size, self.max_size)


@dataclass
class BenchReport:
    config: BenchConfig
    seconds: float = 0.0
    ops: int = 0
    exhausted: int = 0
    per_thread_retries: list = field(default_factory=list)
    lock_spins: int = 0
    traces: list | None = None

    @property
    def throughput(self) -> float:
        return self.ops / self.seconds if self.seconds > 0 else 0.0

    @property
    def cas_retries(self) -> int:
        # spin-lock baselines retry their test-and-set instead of tree CASes
        return sum(self.per_thread_retries) + self.lock_spins

    def row(self) -> list[str]:
        c = self.config
        return [c.workload, c.variant, str(c.threads), str(c.size), str(self.ops),
                f"{self.seconds:.6f}", f"{self.throughput:.2f}", str(self.cas_retries),
                str(self.exhausted)]


def emit_report(reports, stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in reports:
        w.writerow(r.row())


class _Driver:
    """Per-run plumbing shared by the workloads: threads, barrier, counters."""

    def __init__(self, cfg: BenchConfig):
        self.cfg = cfg
        self.alloc = make_allocator(cfg.variant, cfg.tree())
        self.memory = bytearray(cfg.total_memory) if cfg.touch else None
        self.ops = [0] * cfg.threads
        self.exhausted = [0] * cfg.threads
        self.retries = [0] * cfg.threads
        self.traces = [[] for _ in range(cfg.threads)] if cfg.record else None
        self._barrier = threading.Barrier(cfg.threads + 1)
        self._cpus = sorted(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else []

    def rng(self, tid):
        return random.Random(self.cfg.seed * 1_000_003 + tid)

    def grab(self, tid, size):
        r = self.alloc.alloc(size)
        if r is None:
            self.exhausted[tid] += 1
            return None
        if self.memory is not None:
            self.memory[r.offset] = 1
        return r.offset

    def run(self, body) -> BenchReport:
        cfg = self.cfg
        errors = []

        def wrapper(tid):
            if cfg.pin and self._cpus:
                os.sched_setaffinity(0, {self._cpus[tid % len(self._cpus)]})
            self._barrier.wait()
            try:
                body(tid)
            except BaseException as e:  # surfaced after join
                errors.append(e)
            self.retries[tid] = self.alloc.thread_counters()["cas_failures"]

        ts = [threading.Thread(target=wrapper, args=(t,), daemon=True) for t in range(cfg.threads)]
        for t in ts:
            t.start()
        self._barrier.wait()
        t0 = time.perf_counter()
        for t in ts:
            t.join()
        seconds = time.perf_counter() - t0
        if errors:
            raise errors[0]
        counters = self.alloc.counters()
        return BenchReport(
            cfg, seconds, sum(self.ops), sum(self.exhausted),
            list(self.retries), counters.get("lock_spins", 0), self.traces)


def _split(total, threads):
    base, extra = divmod(total, threads)
    return [base + (t < extra) for t in range(threads)]


def run_linux_scalability(cfg: BenchConfig) -> BenchReport:
    """Each thread repeats alloc(size); free(it).  ``ops`` total pairs, default 1M."""
    d = _Driver(cfg)
    share = _split(1_000_000 if cfg.ops is None else cfg.ops, cfg.threads)
    alloc, free, size = d.alloc.alloc, d.alloc.free, cfg.size

    def body(tid):
        done = 0
        for _ in range(share[tid]):
            if d.memory is None:
                r = alloc(size)
                if r is None:
                    d.exhausted[tid] += 1
                    continue
                free(r.offset)
            else:
                off = d.grab(tid, size)
                if off is None:
                    continue
                free(off)
            done += 1
        d.ops[tid] = done

    return d.run(body)


def run_thread_test(cfg: BenchConfig, batch_total: int = 10_000) -> BenchReport:
    """Cycles of allocating a batch of ``batch_total/threads`` chunks, then releasing all of them.

    200 cycles by default; with ``ops`` set, enough cycles to reach that many pairs.
    """
    d = _Driver(cfg)
    batch = max(1, batch_total // cfg.threads)
    cycles = 200 if cfg.ops is None else -(-cfg.ops // (batch * cfg.threads))

    def body(tid):
        held = []
        for _ in range(cycles):
            for _ in range(batch):
                off = d.grab(tid, cfg.size)
                if off is not None:
                    held.append(off)
            for off in held:
                d.alloc.free(off)
            d.ops[tid] += len(held)
            held.clear()

    return d.run(body)


def run_larson(cfg: BenchConfig, slots: int = 64, phase: int = 1000) -> BenchReport:
    """Random replace-one-chunk churn over per-thread slot arrays, for a time window.

    Every ``phase`` steps a thread hands its whole slot array to the next
    thread and adopts whatever array was handed to it, so chunks are
    routinely freed by a thread other than the one that allocated them.
    Runs for ``duration`` seconds (default 2), or exactly ``ops`` steps per
    thread when ``ops`` is given and ``duration`` is not.
    """
    d = _Driver(cfg)
    per = max(1, slots // cfg.threads)
    inbox = [queue.SimpleQueue() for _ in range(cfg.threads)]
    duration = cfg.duration if cfg.duration is not None else (None if cfg.ops is not None else 2.0)
    steps_cap = None if duration is not None else cfg.ops
    lo, hi = cfg.min_size, cfg.max_size
    leftovers = []
    lock = threading.Lock()

    def body(tid):
        rng = d.rng(tid)
        mine = [None] * per
        trace = d.traces[tid] if d.traces is not None else None
        deadline = time.perf_counter() + duration if duration is not None else None
        step = 0
        while True:
            if steps_cap is not None:
                if step >= steps_cap:
                    break
            elif time.perf_counter() >= deadline:
                break
            k = rng.randrange(per)
            size = rng.randint(lo, hi)
            if trace is not None:
                trace.append((k, size))
            if mine[k] is not None:
                d.alloc.free(mine[k])
                d.ops[tid] += 1
            mine[k] = d.grab(tid, size)
            step += 1
            if step % phase == 0 and cfg.threads > 1:
                inbox[(tid + 1) % cfg.threads].put(mine)
                try:
                    mine = inbox[tid].get_nowait()
                except queue.Empty:
                    mine = [None] * per
        with lock:
            leftovers.append(mine)

    rep = d.run(body)
    for q in inbox:
        while not q.empty():
            leftovers.append(q.get_nowait())
    for arr in leftovers:
        for off in arr:
            if off is not None:
                d.alloc.free(off)
    return rep


def run_constant_occupancy(cfg: BenchConfig, pool: int = 1024) -> BenchReport:
    """Free a random pool element, then allocate the same size again.

    The pool mixes sizes ``min_size * 2**k`` for k = 0..4 with weight
    proportional to 2**-k, so small chunks dominate.  ``ops`` total steps,
    default 1M.
    """
    d = _Driver(cfg)
    per = max(1, pool // cfg.threads)
    classes = [cfg.min_size << k for k in range(5) if cfg.min_size << k <= cfg.max_size]
    weights = [2.0 ** -k for k in range(len(classes))]
    share = _split(1_000_000 if cfg.ops is None else cfg.ops, cfg.threads)
    pools = []
    for tid in range(cfg.threads):
        rng = d.rng(tid)
        sizes = rng.choices(classes, weights, k=per)
        chunks = []
        for s in sizes:
            r = d.alloc.alloc(s)
            if r is None:
                for _, off in chunks:
                    d.alloc.free(off)
                for prev in pools:
                    for _, off in prev:
                        d.alloc.free(off)
                raise ConfigError("tree too small for the constant-occupancy pool")
            chunks.append((s, r.offset))
        pools.append(chunks)

    def body(tid):
        rng = d.rng(tid + 7919)
        mine = pools[tid]
        for _ in range(share[tid]):
            k = rng.randrange(per)
            s, off = mine[k]
            if off is not None:
                d.alloc.free(off)
            mine[k] = (s, d.grab(tid, s))
            if mine[k][1] is not None:
                d.ops[tid] += 1

    rep = d.run(body)
    for chunks in pools:
        for _, off in chunks:
            if off is not None:
                d.alloc.free(off)
    return rep


RUNNERS = {
    "linux-scalability": run_linux_scalability,
    "thread-test": run_thread_test,
    "larson": run_larson,
    "constant-occupancy": run_constant_occupancy,
}


def run(cfg: BenchConfig) -> BenchReport:
    return RUNNERS[cfg.workload](cfg)
