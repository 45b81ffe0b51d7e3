import pytest
from hypothesis import given
from hypothesis import strategies as st

from nbbuddy import NBBuddy, PackedBuddy, TreeConfig
from nbbuddy.geometry import BUSY, COAL_LEFT, COAL_RIGHT, OCC, OCC_LEFT, OCC_RIGHT, level_of
from nbbuddy.packed import RANGE_BUSY, bunch_leaf_range, derive_status, slot_shift
from nbbuddy.verify.oracle import expected_bunch_words
from nbbuddy.words import RecordingWords


def recorded(depth, cls=PackedBuddy):
    a = cls(TreeConfig.with_depth(depth), words=RecordingWords)
    arr = a.bunches if cls is PackedBuddy else a.tree
    return a, arr


def rmw(arr):
    out = [(k, i) for k, i, _ in arr.log if k != "load"]
    arr.log.clear()
    return out


def test_bunch_leaf_range_examples():
    assert bunch_leaf_range(1, 0) == (8, 15)
    assert bunch_leaf_range(9, 3) == (9, 9)
    assert bunch_leaf_range(5, 2) == (10, 11)
    assert bunch_leaf_range(3, 5) == (12, 15)  # only depth mod 4 matters


def test_derive_status_examples():
    assert all(derive_status(0, p) == 0 for p in range(1, 16))
    both_occ = (OCC << slot_shift(8)) | (OCC << slot_shift(9))
    assert derive_status(both_occ, 4) & OCC
    left_busy = BUSY << slot_shift(8)
    v = derive_status(left_busy, 4)
    assert v & OCC_LEFT and not v & OCC and not v & OCC_RIGHT


@given(st.integers(0, (1 << 40) - 1))
def test_derive_status_combines_children(w):
    for p in range(1, 8):
        left, right = derive_status(w, 2 * p), derive_status(w, 2 * p + 1)
        v = derive_status(w, p)
        assert bool(v & OCC) == bool(left & OCC and right & OCC)
        assert bool(v & OCC_LEFT) == bool(left & BUSY)
        assert bool(v & OCC_RIGHT) == bool(right & BUSY)
        assert bool(v & COAL_LEFT) == bool(left & (COAL_LEFT | COAL_RIGHT))
        assert bool(v & COAL_RIGHT) == bool(right & (COAL_LEFT | COAL_RIGHT))


def test_node_map_is_a_bijection_onto_tiles():
    for depth in (1, 3, 4, 7, 9):
        a = PackedBuddy(TreeConfig.with_depth(depth))
        seen = set()
        for n in range(1, a.cfg.n_nodes + 1):
            pos = a.node_pos[n]
            assert level_of(pos) == level_of(n) % 4
            seen.add((a.node_bunch[n], pos))
        assert len(seen) == a.cfg.n_nodes


def test_whole_bunch_allocation_is_one_cas():
    a, arr = recorded(3)
    r = a.alloc(64, hint=0)
    assert r.node == 1
    assert rmw(arr) == [("cas", 0)]
    assert a.raw_snapshot() == [RANGE_BUSY[1]]
    a.free(r.offset)
    assert rmw(arr) == [("cas", 0)]
    assert a.raw_snapshot() == [0]


def test_bunch_leaf_allocation_touches_only_its_slot():
    a, arr = recorded(3)
    r = a.alloc(8, hint=0)
    assert rmw(arr) == [("cas", 0)]
    assert a.raw_snapshot() == [BUSY]
    assert [a.status(n) for n in (1, 2, 4, 8)] == [OCC_LEFT, OCC_LEFT, OCC_LEFT, BUSY]
    a.free(r.offset)
    assert a.raw_snapshot() == [0]


def test_climb_across_one_boundary():
    a, arr = recorded(7)
    b, barr = recorded(7, NBBuddy)
    r = a.alloc(8, hint=0)
    ops = rmw(arr)
    assert len(ops) == 2 and all(k == "cas" for k, _ in ops)
    b.alloc(8, hint=0)
    assert len([1 for k, _ in rmw(barr) if k == "cas"]) == 8  # target plus 7 ancestors
    a.free(r.offset)
    # coalescing mark in the top bunch, release below, unmark in the top bunch
    assert rmw(arr) == [("cas", 0), ("cas", a.node_bunch[r.node]), ("cas", 0)]
    assert a.raw_snapshot() == [0] * a.n_bunches


def test_unmark_stops_at_busy_buddy_inside_bunch():
    a, arr = recorded(3)
    r8, r9 = a.alloc(8, hint=0), a.alloc(8, hint=0)
    rmw(arr)
    a.free(r8.offset)
    assert rmw(arr) == [("cas", 0)]
    assert a.raw_snapshot() == [BUSY << slot_shift(9)]


@pytest.mark.parametrize("depth", [2, 4, 5, 8, 9])
def test_matches_expected_words_for_random_live_sets(depth):
    import random
    rng = random.Random(depth)
    a = PackedBuddy(TreeConfig.with_depth(depth))
    live = {}
    for _ in range(400):
        if live and rng.random() < 0.45:
            off = rng.choice(list(live))
            a.free(off)
            del live[off]
        else:
            r = a.alloc(8 << rng.randrange(min(depth, 4)), hint=rng.randrange(1 << depth))
            if r is not None:
                live[r.offset] = r.node
        want = expected_bunch_words(a.cfg, live.values(), a.node_bunch, a.node_pos)
        assert a.raw_snapshot() == want


def test_high_bits_stay_zero():
    a = PackedBuddy(TreeConfig.with_depth(9))
    got = [a.alloc(8, hint=k) for k in range(0, 512, 3)]
    assert all(w < (1 << 40) for w in a.raw_snapshot())
    for r in got:
        a.free(r.offset)
    assert a.raw_snapshot() == [0] * a.n_bunches
