"""Reference allocator and the expected metadata for a given live set.

The oracle is a classic free-list buddy allocator: explicit split on
allocation, explicit merge on release.  Among all free blocks large enough
for a request it picks the lowest address, which is the order in which a
tree scan starting at the left end of a level finds free nodes.
"""

from __future__ import annotations

import heapq

from ..buddy import AllocResult
from ..geometry import BUSY, OCC_LEFT, InvalidAddress, TreeConfig, level_of, target_level
from ..packed import RANGE_BUSY, slot_shift


class SequentialOracle:
    variant = "oracle"

    def __init__(self, cfg: TreeConfig):
        self.cfg = cfg
        top = cfg.max_level
        self._free = [set() for _ in range(cfg.depth + 1)]  # per level: free offsets
        self._heaps = [[] for _ in range(cfg.depth + 1)]
        block = cfg.total_memory >> top
        for k in range(1 << top):
            self._push(top, k * block)
        self.live: dict[int, int] = {}  # relative offset -> level

    def _push(self, level, off):
        self._free[level].add(off)
        heapq.heappush(self._heaps[level], off)

    def _min_free(self, level):
        heap, free = self._heaps[level], self._free[level]
        while heap and heap[0] not in free:
            heapq.heappop(heap)  # stale after a merge
        return heap[0] if heap else None

    def alloc(self, size: int, hint: int | None = None) -> AllocResult | None:
        cfg = self.cfg
        level = target_level(size, cfg)
        best = None
        for lvl in range(level, cfg.max_level - 1, -1):
            off = self._min_free(lvl)
            if off is not None and (best is None or off < best[1]):
                best = (lvl, off)
        if best is None:
            return None
        lvl, off = best
        self._free[lvl].discard(off)
        while lvl < level:
            lvl += 1
            self._push(lvl, off + (cfg.total_memory >> lvl))  # right half stays free
        self.live[off] = level
        chunk = cfg.total_memory >> level
        node = (1 << level) + off // chunk
        return AllocResult(cfg.base_offset + off, node, chunk)

    def free(self, offset: int) -> None:
        cfg = self.cfg
        off = offset - cfg.base_offset
        level = self.live.pop(off, None)
        if level is None:
            raise InvalidAddress(f"offset {offset:#x} is not live")
        while level > cfg.max_level:
            size = cfg.total_memory >> level
            buddy = off ^ size
            if buddy not in self._free[level]:
                break
            self._free[level].discard(buddy)
            off = min(off, buddy)
            level -= 1
        self._push(level, off)

    def live_nodes(self) -> list[int]:
        cfg = self.cfg
        return [(1 << lvl) + off // (cfg.total_memory >> lvl) for off, lvl in self.live.items()]

    def snapshot(self) -> list[int]:
        return expected_tree(self.cfg, self.live_nodes())


def expected_tree(cfg: TreeConfig, nodes) -> list[int]:
    """One-word-per-node state a quiescent allocator must show for ``nodes`` live."""
    tree = [0] * (cfg.n_nodes + 1)
    for n in nodes:
        tree[n] |= BUSY
        lvl = level_of(n)
        while lvl > cfg.max_level:
            tree[n >> 1] |= OCC_LEFT >> (n & 1)
            n >>= 1
            lvl -= 1
    return tree


def expected_bunch_words(cfg: TreeConfig, nodes, node_bunch, node_pos) -> list[int]:
    """Raw packed words for ``nodes`` live, given a packed layout's node tables."""
    out = [0] * (max(node_bunch) + 1)
    for n in nodes:
        out[node_bunch[n]] |= RANGE_BUSY[node_pos[n]]
        lvl = level_of(n)
        child = n >> (lvl & 3)  # root of n's bunch
        lvl &= ~3
        while lvl > cfg.max_level:
            p = child >> 1
            out[node_bunch[p]] |= (OCC_LEFT >> (child & 1)) << slot_shift(node_pos[p])
            child = p >> 3
            lvl -= 4
    return out
