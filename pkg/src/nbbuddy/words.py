"""Word arrays the allocators run on.

Allocators touch shared metadata only through a backend's three entry
points, so swapping the backend changes the synchronization model (or adds
instrumentation) without touching the algorithms:

* ``w[i]``: load.  In production ``w`` is the raw list, so a load is a
  plain subscript; instrumented backends substitute a proxy.
* ``cas(i, expected, new)``: returns the value it observed; it succeeded iff
  that equals ``expected``.
* ``store(i, value)``.

Backends:

* ``AtomicWords``: linearizable single-word CAS, safe for any thread count.
* ``PlainWords``: unsynchronized read-modify-write; callers provide mutual
  exclusion (the spin-lock baselines do).
* ``RecordingWords``: plain words that log every access, for counting RMWs.
"""

from __future__ import annotations

import threading


class PlainWords:
    def __init__(self, size: int):
        self.data = [0] * size
        self.w = self.data
        self.cas = _plain_cas(self.data)

    def __len__(self):
        return len(self.data)

    def store(self, i: int, value: int) -> None:
        self.data[i] = value

    def snapshot(self) -> list[int]:
        return list(self.data)


def _plain_cas(w):
    def cas(i, expected, new):
        cur = w[i]
        if cur == expected:
            w[i] = new
        return cur
    return cas


def _atomic_cas(w, locks, mask):
    def cas(i, expected, new):
        lock = locks[i & mask]
        lock.acquire()
        cur = w[i]
        if cur == expected:
            w[i] = new
        lock.release()
        return cur
    return cas


class AtomicWords(PlainWords):
    """CAS over a list of ints, made atomic with striped locks.

    A stripe lock is held only across the compare and the write of one word,
    the same exclusive window a hardware CAS holds on its cache line.  Loads
    need no lock: reading one list slot is atomic in CPython.  Stores take the
    stripe so they can never land between a CAS's compare and its write.
    """

    def __init__(self, size: int, stripes: int = 1024):
        super().__init__(size)
        stripes = 1 << max(0, (min(stripes, size) - 1).bit_length())
        self._locks = [threading.Lock() for _ in range(stripes)]
        self._mask = stripes - 1
        self.cas = _atomic_cas(self.data, self._locks, self._mask)

    def store(self, i, value):
        lock = self._locks[i & self._mask]
        with lock:
            self.data[i] = value


class _LoggedView:
    __slots__ = ("_data", "_log")

    def __init__(self, data, log):
        self._data = data
        self._log = log

    def __getitem__(self, i):
        self._log.append(("load", i, True))
        return self._data[i]


class RecordingWords(PlainWords):
    """Plain words that append ``(kind, index, ok)`` to ``log`` per access.

    ``ok`` is True for loads, stores and successful CASes.
    """

    def __init__(self, size: int):
        super().__init__(size)
        self.log: list[tuple[str, int, bool]] = []
        self.w = _LoggedView(self.data, self.log)
        plain = self.cas

        def cas(i, expected, new):
            cur = plain(i, expected, new)
            self.log.append(("cas", i, cur == expected))
            return cur
        self.cas = cas

    def store(self, i, value):
        self.log.append(("store", i, True))
        self.data[i] = value
