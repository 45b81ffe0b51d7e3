import threading

import pytest

from nbbuddy import LockedBuddy, SpinLock, TreeConfig, make_allocator
from nbbuddy.verify import random_trace, replay


@pytest.mark.parametrize("layout", ["1lvl", "4lvl"])
def test_same_outcomes_and_state_as_nonblocking(layout):
    cfg = TreeConfig.with_depth(9)
    trace = random_trace(cfg, 3000, seed=11)
    nb = make_allocator(f"{layout}-nb", cfg)
    sl = LockedBuddy(cfg, layout)
    assert replay(nb, trace[:1700]) == replay(sl, trace[:1700])
    assert nb.snapshot() == sl.snapshot()
    assert sl.lock.spins == 0


def test_lock_released_on_error():
    sl = LockedBuddy(TreeConfig.with_depth(3))
    with pytest.raises(ValueError):
        sl.alloc(1 << 20)
    with pytest.raises(ValueError):
        sl.free(5)
    assert sl.alloc(8) is not None  # would spin forever if the lock leaked


def test_spinlock_mutual_exclusion():
    lock = SpinLock()
    box = [0]

    def body():
        for _ in range(2000):
            with lock:
                v = box[0]
                box[0] = v + 1

    ts = [threading.Thread(target=body) for _ in range(4)]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    assert box[0] == 8000


@pytest.mark.parametrize("variant", ["1lvl-sl", "4lvl-sl"])
def test_contention_smoke(variant):
    a = make_allocator(variant, TreeConfig.with_depth(8))
    done = []

    def body():
        for _ in range(500):
            r = a.alloc(8)
            if r is not None:
                a.free(r.offset)
        done.append(1)

    ts = [threading.Thread(target=body) for _ in range(6)]
    for t in ts:
        t.start()
    for t in ts:
        t.join(timeout=60)
    assert len(done) == 6
    assert not any(a.snapshot())
    assert "lock_spins" in a.counters()
