"""Non-blocking buddy allocator over one CAS-able status word per tree node."""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass

from .geometry import (
    BUSY,
    COAL_LEFT,
    COAL_RIGHT,
    OCC,
    OCC_LEFT,
    OCC_RIGHT,
    InvalidAddress,
    TreeConfig,
    index_slot,
    level_of,
    target_level,
)
from .words import AtomicWords

_ordinals = itertools.count()
_hint_local = threading.local()


def thread_hint() -> int:
    """Per-thread scan hint: a Fibonacci hash of the thread's start order."""
    h = getattr(_hint_local, "hint", None)
    if h is None:
        h = _hint_local.hint = (next(_ordinals) * 0x9E3779B1) & 0xFFFFFFFF
    return h


@dataclass(frozen=True, slots=True)
class AllocResult:
    offset: int
    node: int
    size: int


class OpStats:
    __slots__ = ("cas_failures", "exhausted")

    def __init__(self):
        self.cas_failures = 0
        self.exhausted = 0


class BuddyBase:
    """Scan, index bookkeeping and diagnostics common to every variant.

    Subclasses provide ``_probe(i)`` (cheap advisory freeness test),
    ``try_alloc(n)`` returning 0 on success or the blocking node, and
    ``free_node(n, upper_bound)``.
    """

    variant = "?"

    def __init__(self, cfg: TreeConfig, words=AtomicWords, debug: bool = False):
        self.cfg = cfg
        self._words = words
        self.index = words(cfg.n_slots)
        self._local = threading.local()
        self._all_stats: list[OpStats] = []
        self._stats_lock = threading.Lock()
        self.debug = debug
        self._live: dict[int, int] | None = {} if debug else None
        self._live_lock = threading.Lock()

    # diagnostics -----------------------------------------------------------

    def _stats(self) -> OpStats:
        s = getattr(self._local, "stats", None)
        if s is None:
            s = self._local.stats = OpStats()
            with self._stats_lock:
                self._all_stats.append(s)
        return s

    def counters(self) -> dict[str, int]:
        with self._stats_lock:
            stats = list(self._all_stats)
        return {
            "cas_failures": sum(s.cas_failures for s in stats),
            "exhausted": sum(s.exhausted for s in stats),
        }

    def thread_counters(self) -> dict[str, int]:
        """Counters of the calling thread only."""
        s = self._stats()
        return {"cas_failures": s.cas_failures, "exhausted": s.exhausted}

    def per_thread_counters(self) -> list[dict[str, int]]:
        with self._stats_lock:
            return [{"cas_failures": s.cas_failures, "exhausted": s.exhausted}
                    for s in self._all_stats]

    # public API ------------------------------------------------------------

    def alloc(self, size: int, hint: int | None = None) -> AllocResult | None:
        """Grant a chunk of at least ``size`` bytes, or None when exhausted.

        The scan of the target level starts at ``hint`` (modulo the level
        width) and wraps around once.  Raises RequestTooLarge past max_size.
        """
        cfg = self.cfg
        level = target_level(size, cfg)
        first = 1 << level
        last = (first << 1) - 1
        if hint is None:
            hint = thread_hint()
        start = first + (hint & (first - 1))
        probe = self._probe
        try_alloc = self.try_alloc
        for lo, hi in ((start, last), (first, start - 1)):
            i = lo
            while i <= hi:
                if probe(i):
                    failed_at = try_alloc(i)
                    if not failed_at:
                        chunk = cfg.total_memory >> level
                        rel = (i - first) * chunk
                        # published before the address escapes to the caller
                        self.index.store(rel // cfg.min_size, i)
                        res = AllocResult(cfg.base_offset + rel, i, chunk)
                        if self._live is not None:
                            self._debug_track(res)
                        return res
                    i = (failed_at + 1) << (level - level_of(failed_at))
                else:
                    i += 1
        self._stats().exhausted += 1
        return None

    def free(self, offset: int) -> None:
        slot = index_slot(offset, self.cfg)
        if self._live is not None:
            self._debug_untrack(offset)
        n = self.index.w[slot]
        if n == 0:
            raise InvalidAddress(f"offset {offset:#x} was never granted")
        self.free_node(n, self.cfg.max_level)

    nb_alloc = alloc
    nb_free = free

    def _debug_track(self, res):
        with self._live_lock:
            if res.offset in self._live:
                raise AssertionError(f"offset {res.offset:#x} granted twice")
            self._live[res.offset] = res.node

    def _debug_untrack(self, offset):
        with self._live_lock:
            if self._live.pop(offset, None) is None:
                raise InvalidAddress(f"offset {offset:#x} is not live (double or foreign free)")

    def snapshot(self) -> list[int]:
        """Per-node status words, index 0 unused.  Meaningful at quiescence."""
        raise NotImplementedError

    def _probe(self, i: int) -> bool:
        raise NotImplementedError

    def try_alloc(self, n: int) -> int:
        raise NotImplementedError

    def free_node(self, n: int, upper_bound: int) -> None:
        raise NotImplementedError


class NBBuddy(BuddyBase):
    """One status word per node; every metadata update is a single-word CAS."""

    variant = "1lvl-nb"

    def __init__(self, cfg: TreeConfig, words=AtomicWords, debug: bool = False):
        super().__init__(cfg, words, debug)
        self.tree = words(cfg.n_nodes + 1)

    def snapshot(self):
        return self.tree.snapshot()

    def _probe(self, i):
        return not self.tree.w[i] & BUSY

    def try_alloc(self, n: int) -> int:
        tree = self.tree
        if tree.cas(n, 0, BUSY) != 0:
            return n
        w, cas = tree.w, tree.cas
        max_level = self.cfg.max_level
        current = n
        lvl = level_of(n)
        while lvl > max_level:
            child = current
            current >>= 1
            lvl -= 1
            side = child & 1
            while True:
                cur = w[current]
                if cur & OCC:
                    self.free_node(n, lvl + 1)
                    return current
                new = (cur & ~(COAL_LEFT >> side)) | (OCC_LEFT >> side)
                if cas(current, cur, new) == cur:
                    break
                self._stats().cas_failures += 1
        return 0

    def free_node(self, n: int, upper_bound: int) -> None:
        tree = self.tree
        w, cas = tree.w, tree.cas
        # phase 1: announce the release on the path
        runner = n
        current = n >> 1
        lvl = level_of(n)
        while lvl > upper_bound:
            side = runner & 1
            or_val = COAL_LEFT >> side
            while True:
                cur = w[current]
                old = cas(current, cur, cur | or_val)
                if old == cur:
                    break
                self._stats().cas_failures += 1
            # buddy occupied and not itself being released: parent stays split
            if old & (OCC_RIGHT << side) and not old & (COAL_RIGHT << side):
                break
            runner = current
            current >>= 1
            lvl -= 1
        # phase 2: only the owner ever writes a non-zero occupied word
        tree.store(n, 0)
        # phase 3
        if level_of(n) != upper_bound:
            self.unmark(n, upper_bound)

    def unmark(self, n: int, upper_bound: int) -> None:
        w, cas = self.tree.w, self.tree.cas
        current = n
        lvl = level_of(n)
        while True:
            side = current & 1
            current >>= 1
            lvl -= 1
            clear = ~((OCC_LEFT | COAL_LEFT) >> side)
            coal = COAL_LEFT >> side
            while True:
                cur = w[current]
                if not cur & coal:
                    # an allocation reclaimed this branch meanwhile
                    return
                new = cur & clear
                if cas(current, cur, new) == cur:
                    break
                self._stats().cas_failures += 1
            if lvl <= upper_bound or new & (OCC_RIGHT << side):
                return
