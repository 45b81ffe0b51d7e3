"""Safety checkers over live sets and quiescent snapshots."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from ..geometry import COAL_LEFT, COAL_RIGHT, TreeConfig
from ..packed import PackedBuddy, derive_status
from .oracle import expected_bunch_words, expected_tree


@dataclass(frozen=True)
class Grant:
    offset: int
    size: int
    requested: int | None = None
    node: int | None = None

    @property
    def end(self):
        return self.offset + self.size


@dataclass
class Verdict:
    ok: bool
    detail: str = ""
    where: list = field(default_factory=list)
    # for state mismatches: "coal" when only coalescing bits differ, else "occupancy"
    kind: str = ""

    def __bool__(self):
        return self.ok


OK = Verdict(True)


def bucket(requested: int, min_size: int) -> int:
    size = max(requested, min_size)
    return 1 << (size - 1).bit_length()


class LiveSet:
    """Granted, not yet released chunks keyed by offset.  Safe to share between threads."""

    def __init__(self, grants=()):
        self._lock = threading.Lock()
        self._grants: dict[int, Grant] = {}
        for g in grants:
            self.add(g)

    @classmethod
    def from_ranges(cls, ranges):
        return cls(Grant(a, b - a) for a, b in ranges)

    def add(self, g: Grant) -> None:
        with self._lock:
            self._grants[g.offset] = g

    def remove(self, offset: int) -> Grant:
        with self._lock:
            return self._grants.pop(offset)

    def grants(self) -> list[Grant]:
        with self._lock:
            return sorted(self._grants.values(), key=lambda g: g.offset)

    def nodes(self) -> list[int]:
        return [g.node for g in self.grants()]

    def __len__(self):
        return len(self._grants)


def check_grant(g: Grant, min_size: int = 1, base_offset: int = 0) -> Verdict:
    """Size and alignment of a single grant."""
    if g.offset < base_offset:
        return Verdict(False, f"grant {g} starts below the managed region", [g])
    if g.size & (g.size - 1):
        return Verdict(False, f"grant {g} is not a power of two", [g])
    if (g.offset - base_offset) % g.size:
        return Verdict(False, f"grant {g} is not aligned to its size", [g])
    if g.requested is not None:
        if g.size < g.requested:
            return Verdict(False, f"grant {g} is smaller than requested", [g])
        if g.size != bucket(g.requested, min_size):
            return Verdict(False, f"grant {g} is not the bucket of {g.requested} bytes", [g])
    return OK


def check_s1(live, min_size: int = 1, base_offset: int = 0) -> Verdict:
    """Grants must be pairwise disjoint, aligned, and sized to their request's bucket."""
    grants = live.grants() if isinstance(live, LiveSet) else sorted(live, key=lambda g: g.offset)
    for prev, g in zip(grants, grants[1:]):
        if g.offset < prev.end:
            return Verdict(False, f"overlap: [{prev.offset}, {prev.end}) and [{g.offset}, {g.end})",
                           [prev, g])
    for g in grants:
        v = check_grant(g, min_size, base_offset)
        if not v:
            return v
    return OK


class GrantRegistry:
    """Concurrent S1 check: every grant is claimed slot by slot in a shared map.

    ``claim`` fails on the first grant that touches a slot still held by
    another live grant, which is exactly a disjointness violation.
    """

    def __init__(self, cfg: TreeConfig):
        self.cfg = cfg
        self._held = bytearray(cfg.n_slots)
        self._lock = threading.Lock()
        self.violations: list[str] = []

    def _span(self, g):
        a = (g.offset - self.cfg.base_offset) // self.cfg.min_size
        return a, a + max(1, g.size // self.cfg.min_size)

    def claim(self, g: Grant) -> Verdict:
        v = check_grant(g, self.cfg.min_size, self.cfg.base_offset)
        if not v:
            self.violations.append(v.detail)
            return v
        a, b = self._span(g)
        with self._lock:
            if self._held.find(1, a, b) != -1:
                v = Verdict(False, f"grant {g} overlaps a live chunk", [g])
                self.violations.append(v.detail)
                return v
            self._held[a:b] = b"\x01" * (b - a)
        return OK

    def release(self, g: Grant) -> None:
        a, b = self._span(g)
        with self._lock:
            self._held[a:b] = bytes(b - a)


def expected_snapshot(alloc, nodes) -> list[int]:
    """What ``alloc.snapshot()`` must return at quiescence with ``nodes`` live."""
    inner = getattr(alloc, "inner", alloc)
    cfg = inner.cfg
    if isinstance(inner, PackedBuddy):
        raw = expected_bunch_words(cfg, nodes, inner.node_bunch, inner.node_pos)
        nb, np_ = inner.node_bunch, inner.node_pos
        return [0] + [derive_status(raw[nb[n]], np_[n]) for n in range(1, cfg.n_nodes + 1)]
    return expected_tree(cfg, nodes)


def check_quiescent(snapshot, live, alloc) -> Verdict:
    """Compare a quiescent snapshot with the state implied by the live set.

    ``alloc`` selects the layout: the one-word tree shows only side bits on
    ancestors, the packed tree's expanded view also derives OCC for interior
    in-bunch nodes whose children are all taken.
    """
    nodes = live.nodes() if isinstance(live, LiveSet) else list(live)
    want = expected_snapshot(alloc, nodes)
    if len(snapshot) != len(want):
        return Verdict(False, f"snapshot has {len(snapshot)} words, expected {len(want)}")
    diff = [i for i in range(1, len(want)) if snapshot[i] != want[i]]
    if diff:
        shown = ", ".join(f"{i}: {snapshot[i]:#x} != {want[i]:#x}" for i in diff[:8])
        coal_only = all(not (snapshot[i] ^ want[i]) & ~_COAL for i in diff)
        return Verdict(False, f"{len(diff)} node(s) differ ({shown})", diff,
                       "coal" if coal_only else "occupancy")
    inner = getattr(alloc, "inner", alloc)
    if isinstance(inner, PackedBuddy):
        raw = inner.raw_snapshot()
        want_raw = expected_bunch_words(inner.cfg, nodes, inner.node_bunch, inner.node_pos)
        bad = [b for b, (x, y) in enumerate(zip(raw, want_raw)) if x != y]
        if bad:
            return Verdict(False, f"bunch words {bad[:8]} differ in bits the view hides", bad,
                           "occupancy")
    return OK


_COAL = COAL_LEFT | COAL_RIGHT


def check_reuse(alloc) -> Verdict:
    """With nothing live, every max-size block must be grantable (then is released again)."""
    cfg = getattr(alloc, "inner", alloc).cfg
    got = []
    while True:
        r = alloc.alloc(cfg.max_size, 0)
        if r is None:
            break
        got.append(r.offset)
    for off in got:
        alloc.free(off)
    want = 1 << cfg.max_level
    if len(got) != want:
        return Verdict(False, f"only {len(got)} of {want} max-size blocks grantable after drain",
                       kind="occupancy")
    return OK
