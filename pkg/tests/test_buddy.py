import threading

import pytest

from nbbuddy import InvalidAddress, NBBuddy, RequestTooLarge, TreeConfig
from nbbuddy.geometry import BUSY, OCC


def small(depth=2, **kw):
    return NBBuddy(TreeConfig.with_depth(depth, **kw))


def test_fresh_state():
    a = small()
    assert a.snapshot() == [0] * 8
    assert a.index.snapshot() == [0] * 4
    big = NBBuddy(TreeConfig.with_depth(20))
    assert len(big.tree) == (1 << 21)  # slot 0 unused


def test_first_leaf_allocation_marks_ancestors():
    a = small()
    r = a.alloc(8, hint=0)
    assert (r.offset, r.node, r.size) == (0, 4, 8)
    assert a.snapshot() == [0, 0x02, 0x02, 0, 0x13, 0, 0, 0]
    assert a.index.snapshot()[0] == 4
    # root is partially taken, so a whole-region request cannot be served
    assert a.alloc(32, hint=0) is None


def test_try_alloc_direct():
    a = small()
    assert a.try_alloc(4) == 0
    s = a.snapshot()
    assert (s[1], s[2], s[4]) == (0x02, 0x02, 0x13)


def test_try_alloc_reverts_on_occupied_ancestor():
    a = small()
    a.tree.store(2, OCC)
    assert a.try_alloc(4) == 2
    assert a.snapshot() == [0, 0, OCC, 0, 0, 0, 0, 0]


def test_free_returns_to_zero():
    a = small()
    r = a.alloc(8, hint=0)
    a.free(r.offset)
    assert a.snapshot() == [0] * 8


def test_free_stops_at_occupied_buddy():
    a = small()
    r4, r5 = a.alloc(8, hint=0), a.alloc(8, hint=0)
    assert (r4.node, r5.node) == (4, 5)
    a.free(r4.offset)
    s = a.snapshot()
    assert s[4] == 0 and s[2] == 0x01 and s[1] == 0x02


def test_sibling_leaves_show_both_side_bits():
    a = small()
    a.alloc(8, hint=0)
    a.alloc(8, hint=0)
    assert a.snapshot()[2] == 0x03


def test_scan_skips_taken_subtree():
    a = small(3)
    first = a.alloc(16, hint=0)  # node 4, covers leaves 8 and 9
    r = a.alloc(8, hint=0)
    assert first.node == 4 and r.node == 10


def test_hint_wraps_around_level():
    a = small(3)
    r = a.alloc(8, hint=7)
    assert r.node == 15
    r = a.alloc(8, hint=7)
    assert r.node == 8  # wrapped to the start of the level


def test_exhaustion_and_reuse():
    a = small(3)
    got = [a.alloc(8, hint=0) for _ in range(8)]
    assert [g.node for g in got] == list(range(8, 16))
    assert a.alloc(8, hint=0) is None
    assert a.counters()["exhausted"] == 1
    for g in got:
        a.free(g.offset)
    assert a.snapshot() == [0] * 16
    assert a.alloc(64, hint=0).node == 1


def test_max_level_bounds_the_climb():
    cfg = TreeConfig(64, 8, max_size=16)
    a = NBBuddy(cfg)
    assert cfg.max_level == 2
    r = a.alloc(8, hint=0)
    s = a.snapshot()
    # marks stop at the max-size level; nodes above it are never touched
    assert s[8] == BUSY and s[4] == 0x02 and s[2] == 0 and s[1] == 0
    with pytest.raises(RequestTooLarge):
        a.alloc(32)
    a.free(r.offset)
    assert a.snapshot() == [0] * 16


def test_base_offset_is_applied():
    a = NBBuddy(TreeConfig(1024, 8, base_offset=1 << 20))
    r = a.alloc(100, hint=0)
    assert r.offset == 1 << 20 and r.size == 128
    a.free(r.offset)
    assert a.snapshot() == [0] * 256


def test_bad_frees():
    a = small()
    with pytest.raises(InvalidAddress):
        a.free(3)
    with pytest.raises(InvalidAddress):
        a.free(8)  # never granted
    d = NBBuddy(TreeConfig.with_depth(2), debug=True)
    r = d.alloc(8, hint=0)
    d.free(r.offset)
    with pytest.raises(InvalidAddress):
        d.free(r.offset)


def test_threads_share_without_overlap():
    a = NBBuddy(TreeConfig.with_depth(10))
    seen, lock = [], threading.Lock()
    all_allocated = threading.Barrier(4)

    def body():
        mine = []
        for i in range(300):
            r = a.alloc(8 << (i % 3))
            if r is not None:
                mine.append(r)
        with lock:
            seen.extend(mine)
        all_allocated.wait()
        for r in mine:
            a.free(r.offset)

    ts = [threading.Thread(target=body) for _ in range(4)]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    spans = sorted((r.offset, r.offset + r.size) for r in seen)
    assert all(b <= c for (_, b), (c, _) in zip(spans, spans[1:]))
    assert a.snapshot() == [0] * len(a.snapshot())
