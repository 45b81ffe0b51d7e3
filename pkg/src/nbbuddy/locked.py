"""Blocking baselines: the tree allocators behind one global spin-lock."""

from __future__ import annotations

import threading
import time

from .buddy import AllocResult, NBBuddy
from .geometry import TreeConfig
from .packed import PackedBuddy
from .words import PlainWords


class SpinLock:
    """Test-and-set spin-lock with bounded exponential backoff.

    Each backoff round yields the interpreter (``sleep(0)`` drops the GIL),
    which is what a spinning core does for the lock holder on real hardware:
    it stops competing for the resource the holder needs to finish.
    """

    __slots__ = ("_flag", "max_backoff", "spins")

    def __init__(self, max_backoff: int = 64):
        self._flag = threading.Lock()
        self.max_backoff = max_backoff
        self.spins = 0

    def acquire(self) -> None:
        tas = self._flag.acquire
        if tas(False):
            return
        delay = 1
        while True:
            for _ in range(delay):
                pass
            time.sleep(0)
            if tas(False):
                return
            self.spins += 1
            if delay < self.max_backoff:
                delay <<= 1

    def release(self) -> None:
        self._flag.release()

    def __enter__(self):
        self.acquire()
        return self

    def __exit__(self, *exc):
        self._flag.release()


class LockedBuddy:
    """``1lvl-sl`` / ``4lvl-sl``: the non-blocking tree code on plain words.

    Inside the critical section the CAS of the inner allocator degenerates
    to compare-and-store, and the coalescing bits it sets are always cleared
    again before the lock is released.
    """

    def __init__(self, cfg: TreeConfig, layout: str = "1lvl", debug: bool = False,
                 max_backoff: int = 64):
        inner_cls = {"1lvl": NBBuddy, "4lvl": PackedBuddy}[layout]
        self.inner = inner_cls(cfg, words=PlainWords, debug=debug)
        self.cfg = cfg
        self.variant = f"{layout}-sl"
        self.lock = SpinLock(max_backoff)

    def alloc(self, size: int, hint: int | None = None) -> AllocResult | None:
        with self.lock:
            return self.inner.alloc(size, hint)

    def free(self, offset: int) -> None:
        with self.lock:
            self.inner.free(offset)

    locked_alloc = alloc
    locked_free = free

    def snapshot(self) -> list[int]:
        with self.lock:
            return self.inner.snapshot()

    def counters(self) -> dict[str, int]:
        c = self.inner.counters()
        c["lock_spins"] = self.lock.spins
        return c

    def thread_counters(self):
        return self.inner.thread_counters()

    def per_thread_counters(self):
        return self.inner.per_thread_counters()
