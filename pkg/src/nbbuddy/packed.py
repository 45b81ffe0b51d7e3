"""4-level packed variant: 15 tree nodes per 64-bit word.

A bunch is a 4-level sub-tree whose root sits on a level divisible by 4.
Only its 8 bottom nodes (positions 8..15) are stored, 5 status bits each, in
bits 0..39 of the bunch word.  Every other in-bunch node is derived from its
children, so one CAS updates a node together with all its in-bunch
ancestors, and a climb costs one RMW per bunch crossed instead of one per
level.

Bunch-leaf slots carry the side/coalescing bits that refer to the child
bunches below them; the coalescing protocol of the 1-level allocator runs
unchanged on those boundary slots.  Inside a bunch the same decisions
(stop at an occupied buddy, keep going past a coalescing one) are taken on
the derived view of a single word snapshot.

Tiles are aligned at the root.  When the depth is not 3 mod 4 the bottom
tile is partial; its missing levels are virtual slots that only ever hold
BUSY patterns written on behalf of the real nodes above them.
"""

from __future__ import annotations

from .buddy import BuddyBase
from .geometry import (
    BUSY,
    COAL_LEFT,
    COAL_RIGHT,
    OCC,
    OCC_LEFT,
    OCC_RIGHT,
    STATUS_MASK,
    TreeConfig,
    is_coal,
    is_coal_buddy,
    is_occ_buddy,
    level_of,
)
from .geometry import unmark as unmark_bits
from .words import AtomicWords

SLOT_BITS = 5
BUNCH_LEVELS = 4
COAL = COAL_LEFT | COAL_RIGHT


def slot_shift(pos: int) -> int:
    return SLOT_BITS * (pos - 8)


def bunch_leaf_range(b_n: int, d_n: int) -> tuple[int, int]:
    """Bunch-leaf positions covered by in-bunch position ``b_n`` of a node at tree depth ``d_n``."""
    k = 3 - (d_n & 3)
    return b_n << k, ((b_n + 1) << k) - 1


def _range_pattern(pos: int, bits: int) -> int:
    first, last = bunch_leaf_range(pos, level_of(pos))
    out = 0
    for p in range(first, last + 1):
        out |= bits << slot_shift(p)
    return out


RANGE_MASK = [0] + [_range_pattern(p, STATUS_MASK) for p in range(1, 16)]
RANGE_BUSY = [0] + [_range_pattern(p, BUSY) for p in range(1, 16)]
RANGE_OCC = [0] + [_range_pattern(p, OCC) for p in range(1, 16)]
RANGE_COAL = [0] + [_range_pattern(p, COAL) for p in range(1, 16)]


def derive_status(w: int, pos: int) -> int:
    """Status bits of in-bunch position ``pos`` as seen through bunch word ``w``."""
    if pos >= 8:
        return (w >> slot_shift(pos)) & STATUS_MASK
    left = derive_status(w, 2 * pos)
    right = derive_status(w, 2 * pos + 1)
    val = OCC if left & OCC and right & OCC else 0
    if left & BUSY:
        val |= OCC_LEFT
    if right & BUSY:
        val |= OCC_RIGHT
    if left & COAL:
        val |= COAL_LEFT
    if right & COAL:
        val |= COAL_RIGHT
    return val


class PackedBuddy(BuddyBase):
    variant = "4lvl-nb"

    def __init__(self, cfg: TreeConfig, words=AtomicWords, debug: bool = False):
        super().__init__(cfg, words, debug)
        n_nodes = cfg.n_nodes
        bunch_id = {}
        for lvl in range(0, cfg.depth + 1, BUNCH_LEVELS):
            for r in range(1 << lvl, 1 << (lvl + 1)):
                bunch_id[r] = len(bunch_id)
        self.n_bunches = len(bunch_id)
        node_bunch = [0] * (n_nodes + 1)
        node_pos = [0] * (n_nodes + 1)
        for n in range(1, n_nodes + 1):
            m = (n.bit_length() - 1) & 3
            root = n >> m
            node_bunch[n] = bunch_id[root]
            node_pos[n] = (1 << m) | (n - (root << m))
        self.node_bunch = node_bunch
        self.node_pos = node_pos
        self.bunches = words(self.n_bunches)

    # views ---------------------------------------------------------------------

    def raw_snapshot(self) -> list[int]:
        return self.bunches.snapshot()

    def snapshot(self):
        """Per-node derived status words, index 0 unused."""
        raw = self.bunches.snapshot()
        nb, np_ = self.node_bunch, self.node_pos
        return [0] + [derive_status(raw[nb[n]], np_[n]) for n in range(1, self.cfg.n_nodes + 1)]

    def status(self, n: int) -> int:
        return derive_status(self.bunches.w[self.node_bunch[n]], self.node_pos[n])

    # helpers -------------------------------------------------------------------

    def _probe(self, i):
        return not self.bunches.w[self.node_bunch[i]] & RANGE_BUSY[self.node_pos[i]]

    def _blocking_node(self, w: int, p: int) -> int:
        # p's slot has OCC: report the highest in-bunch ancestor that is
        # fully occupied, so the scan skips the largest blocked subtree
        best = p
        lvl = level_of(p)
        floor = max(lvl & ~3, self.cfg.max_level)
        x = p
        np_ = self.node_pos
        while lvl > floor:
            x >>= 1
            lvl -= 1
            occ = RANGE_OCC[np_[x]]
            if w & occ == occ:
                best = x
        return best

    def _walk(self, w: int, runner: int, upper_bound: int, coal_aware: bool) -> bool:
        """Run the in-bunch part of a release climb on snapshot ``w``.

        Returns True when the climb must continue into the parent bunch.
        """
        np_ = self.node_pos
        lvl = level_of(runner)
        root_lvl = lvl & ~3
        while lvl > root_lvl:
            if lvl <= upper_bound:
                return False
            bpos = np_[runner ^ 1]
            if w & RANGE_BUSY[bpos] and not (coal_aware and w & RANGE_COAL[bpos]):
                return False
            runner >>= 1
            lvl -= 1
        return lvl > upper_bound

    # algorithm -----------------------------------------------------------------

    def try_alloc(self, n: int) -> int:
        bunches = self.bunches
        words, cas = bunches.w, bunches.cas
        nb, np_ = self.node_bunch, self.node_pos
        b = nb[n]
        pos = np_[n]
        mask = RANGE_MASK[pos]
        busy = RANGE_BUSY[pos]
        while True:
            w = words[b]
            if w & mask:
                return n
            if cas(b, w, w | busy) == w:
                break
            self._stats().cas_failures += 1
        lvl = level_of(n)
        root_lvl = lvl & ~3
        child = n >> (lvl & 3)
        max_level = self.cfg.max_level
        while root_lvl > max_level:
            p = child >> 1
            pb = nb[p]
            sh = slot_shift(np_[p])
            side = child & 1
            while True:
                w = words[pb]
                s = (w >> sh) & STATUS_MASK
                if s & OCC:
                    failed = self._blocking_node(w, p)
                    self.free_node(n, root_lvl)
                    return failed
                ns = (s & ~(COAL_LEFT >> side)) | (OCC_LEFT >> side)
                if cas(pb, w, (w & ~(STATUS_MASK << sh)) | (ns << sh)) == w:
                    break
                self._stats().cas_failures += 1
            child = p >> 3
            root_lvl -= BUNCH_LEVELS
        return 0

    def free_node(self, n: int, upper_bound: int) -> None:
        bunches = self.bunches
        words, cas = bunches.w, bunches.cas
        nb, np_ = self.node_bunch, self.node_pos
        b = nb[n]
        lvl = level_of(n)
        # phase 1: coalescing marks on the boundary slots of the path
        go_on = self._walk(words[b], n, upper_bound, True)
        child = n >> (lvl & 3)
        while go_on:
            p = child >> 1
            pb = nb[p]
            sh = slot_shift(np_[p])
            or_val = (COAL_LEFT >> (child & 1)) << sh
            while True:
                w = words[pb]
                if cas(pb, w, w | or_val) == w:
                    break
                self._stats().cas_failures += 1
            s = (w >> sh) & STATUS_MASK
            if is_occ_buddy(s, child) and not is_coal_buddy(s, child):
                break
            go_on = self._walk(w, p, upper_bound, True)
            child = p >> 3
        nw = self._release(b, ~RANGE_MASK[np_[n]])
        # phase 3
        if lvl != upper_bound:
            self.unmark(n, upper_bound, nw)

    def _release(self, b: int, keep: int) -> int:
        """Phase 2: clear n's slots (n plus its in-bunch ancestors), return the new word."""
        words, cas = self.bunches.w, self.bunches.cas
        while True:
            w = words[b]
            nw = w & keep
            if cas(b, w, nw) == w:
                return nw
            self._stats().cas_failures += 1

    def unmark(self, n: int, upper_bound: int, released_word: int) -> None:
        if not self._walk(released_word, n, upper_bound, False):
            return
        bunches = self.bunches
        words, cas = bunches.w, bunches.cas
        nb, np_ = self.node_bunch, self.node_pos
        child = n >> (level_of(n) & 3)
        while True:
            p = child >> 1
            pb = nb[p]
            sh = slot_shift(np_[p])
            while True:
                w = words[pb]
                s = (w >> sh) & STATUS_MASK
                if not is_coal(s, child):
                    return
                ns = unmark_bits(s, child)
                nw = (w & ~(STATUS_MASK << sh)) | (ns << sh)
                if cas(pb, w, nw) == w:
                    break
                self._stats().cas_failures += 1
            if is_occ_buddy(ns, child) or not self._walk(nw, p, upper_bound, False):
                return
            child = p >> 3
