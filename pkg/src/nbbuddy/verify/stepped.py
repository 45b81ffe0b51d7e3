"""Deterministic interleaving of allocator threads at shared-word granularity.

Every worker is a greenlet.  The word backend handed to the allocator parks
the calling worker before each load, CAS or store and hands control back to
the controller, which decides who performs the next access.  The allocator
code is the production code; only the backend differs.

Schedules are lists of decisions, one per line when written to disk:
``<tid>`` runs that thread's pending access, ``freeze <tid,...>`` stops
threads for the rest of the run.
"""

from __future__ import annotations

import sys
from collections import Counter
from dataclasses import dataclass, field
from functools import partial

from greenlet import greenlet, getcurrent

from ..geometry import TreeConfig
from ..variants import make_allocator
from .checks import OK, Grant, Verdict, check_grant, check_quiescent, check_reuse


@dataclass(frozen=True)
class Access:
    kind: str  # load | cas | store
    array: int
    index: int
    func: str  # allocator function performing the access

    def __str__(self):
        return f"{self.kind} {self.array}[{self.index}] in {self.func}"


class _View:
    __slots__ = ("_words",)

    def __init__(self, words):
        self._words = words

    def __getitem__(self, i):
        sw = self._words
        t = sw.ctl.park("load", sw.aid, i)
        v = sw.data[i]
        if t is not None:
            sw.ctl.performed(t, "load", sw.aid, i, v, True, None)
        return v


class SteppedWords:
    """Word array whose accesses are scheduling points (when made from a worker)."""

    def __init__(self, size, ctl, aid):
        self.data = [0] * size
        self.ctl = ctl
        self.aid = aid
        self.w = _View(self)

    def __len__(self):
        return len(self.data)

    def cas(self, i, expected, new):
        t = self.ctl.park("cas", self.aid, i)
        cur = self.data[i]
        ok = cur == expected
        if ok:
            self.data[i] = new
        if t is not None:
            self.ctl.performed(t, "cas", self.aid, i, cur, ok, expected)
        return cur

    def store(self, i, value):
        t = self.ctl.park("store", self.aid, i)
        self.data[i] = value
        if t is not None:
            self.ctl.performed(t, "store", self.aid, i, value, True, None)

    def snapshot(self):
        return list(self.data)


@dataclass
class Worker:
    tid: int
    program: list
    hint: int = 0
    g: greenlet | None = None
    pending: Access | None = None
    done: bool = False
    frozen: bool = False
    op_index: int = 0
    op_steps: int = 0
    steps: int = 0
    last_load: tuple | None = None
    last: Access | None = None  # most recent performed access
    last_ok: bool = True
    results: list = field(default_factory=list)
    op_steps_log: list = field(default_factory=list)
    entries: Counter = field(default_factory=Counter)
    exits: Counter = field(default_factory=Counter)


class SteppedRun:
    """One execution of per-thread programs over a fresh allocator.

    Program steps are ``("alloc", size, label)`` and ``("free", label)``.
    Labels name grants across threads; ``setup`` runs before any worker
    starts, without scheduling points.  Freeing a label whose allocation
    came back exhausted is a no-op.
    """

    def __init__(self, variant: str, cfg: TreeConfig, programs, setup=(), hints=None):
        if not variant.endswith("-nb"):
            raise ValueError(f"stepped runs need a non-blocking variant, got {variant!r}")
        self.main = getcurrent()
        self.cfg = cfg
        self.variant = variant
        self.arrays: list[SteppedWords] = []
        self.alloc = make_allocator(variant, cfg, words=self._new_words)
        self.labels: dict[str, Grant] = {}
        self.violations: list[str] = []
        self.witness_failures: list[str] = []
        self.retries = 0
        self.decisions: list = []
        self._versions: dict[tuple, int] = {}
        self.current: Worker | None = None
        self._wrap_call_counters()
        self.index_aid = self.arrays.index(getattr(self.alloc, "inner", self.alloc).index)
        for op in setup:
            self._do(None, op)
        hints = hints or [0] * len(programs)
        self.threads = [Worker(t, list(p), hints[t]) for t, p in enumerate(programs)]
        for t in self.threads:
            t.g = greenlet(partial(_worker_main, self, t), parent=self.main)
            self._resume(t)

    # backend hooks ----------------------------------------------------------

    def _new_words(self, size):
        w = SteppedWords(size, self, len(self.arrays))
        self.arrays.append(w)
        return w

    def park(self, kind, aid, i):
        if getcurrent() is self.main:
            return None
        t = self.current
        t.pending = Access(kind, aid, i, sys._getframe(2).f_code.co_name)
        self.main.switch()
        return t

    def performed(self, t: Worker, kind, aid, i, value, ok, expected):
        key = (aid, i)
        if kind == "load":
            t.last_load = (key, self._versions.get(key, 0), value)
        else:
            if ok:
                self._versions[key] = self._versions.get(key, 0) + 1
            elif t.last_load is not None and t.last_load[0] == key and t.last_load[2] == expected:
                # a retry: the word must have been written by someone else since our load
                self.retries += 1
                if self._versions.get(key, 0) == t.last_load[1]:
                    self.witness_failures.append(
                        f"thread {t.tid}: CAS on {key} failed with no intervening write")
            t.last_load = None
        t.last, t.last_ok = t.pending, ok
        t.steps += 1
        t.op_steps += 1

    # call pairing: an operation finishes only if its inner calls returned --------

    def _wrap_call_counters(self):
        inner = getattr(self.alloc, "inner", self.alloc)
        for name in ("try_alloc", "free_node"):
            orig = getattr(inner, name)

            def wrapped(*args, _orig=orig, _name=name):
                t = self.current
                if t is not None:
                    t.entries[_name] += 1
                r = _orig(*args)
                if t is not None:
                    t.exits[_name] += 1
                return r
            setattr(inner, name, wrapped)

    # workers ----------------------------------------------------------------

    def _finish_op(self, t: Worker, k: int, result) -> None:
        t.results.append(result)
        t.op_steps_log.append(t.op_steps)
        if t.entries != t.exits:
            self.violations.append(
                f"thread {t.tid} op {k}: finished with unbalanced calls {dict(t.entries - t.exits)}")

    def _do(self, t, op):
        if op[0] == "alloc":
            size, label = op[1], op[2]
            r = self.alloc.alloc(size, t.hint if t else 0)
            if r is None:
                return None
            g = Grant(r.offset, r.size, size, r.node)
            v = check_grant(g, self.cfg.min_size, self.cfg.base_offset)
            if not v:
                self.violations.append(v.detail)
            for other in self.labels.values():
                if g.offset < other.end and other.offset < g.end:
                    self.violations.append(f"grant {g} overlaps live grant {other}")
            self.labels[label] = g
            return r.offset
        g = self.labels.pop(op[1], None)
        if g is None:
            return "skip"
        self.alloc.free(g.offset)
        return "freed"

    def _resume(self, t: Worker):
        self.current = t
        t.g.switch()
        self.current = None

    # controller interface ---------------------------------------------------

    def pending_word(self, tid: int) -> int:
        """Current value of the word the thread is about to access."""
        acc = self.threads[tid].pending
        return self.arrays[acc.array].data[acc.index]

    def runnable(self) -> list[int]:
        return [t.tid for t in self.threads if not t.done and not t.frozen]

    def step(self, tid: int) -> None:
        t = self.threads[tid]
        if t.done or t.frozen:
            raise ValueError(f"thread {tid} cannot run")
        self.decisions.append(tid)
        self._resume(t)

    def freeze(self, tids) -> None:
        tids = sorted(tids)
        for tid in tids:
            self.threads[tid].frozen = True
        self.decisions.append(("freeze", tuple(tids)))

    def apply(self, decision) -> None:
        if isinstance(decision, tuple):
            self.freeze(decision[1])
        else:
            self.step(decision)

    def state_key(self):
        """Hashable summary that determines every future of this run.

        Shared words and live grants, plus each worker's suspended frames:
        code position and the plain-valued locals.  Object-valued locals are
        fixed per run (allocator, bound methods) and are left out.
        """
        words = tuple(tuple(a.data) for a in self.arrays)
        labels = tuple(sorted((k, g.offset) for k, g in self.labels.items()))
        return words, labels, tuple(self._thread_key(t) for t in self.threads)

    def _thread_key(self, t: Worker):
        if t.done:
            return (t.op_index, True)
        frames = []
        f = t.g.gr_frame
        while f is not None and f.f_code is not _RUN_CODE:
            frames.append((f.f_code, f.f_lasti,
                           tuple((k, v) for k, v in f.f_locals.items() if type(v) in _PLAIN)))
            f = f.f_back
        return t.op_index, t.frozen, tuple(frames)

    @property
    def finished(self):
        return all(t.done for t in self.threads)

    def final_checks(self) -> "FinalReport":
        """Quiescent-state match for the surviving grants, drain, then reuse of the whole region."""
        rep = FinalReport(list(self.violations), list(self.witness_failures))
        rep.final = check_quiescent(self.alloc.snapshot(), [g.node for g in self.labels.values()],
                                    self.alloc)
        for label in list(self.labels):
            self.alloc.free(self.labels.pop(label).offset)
        rep.drained = check_quiescent(self.alloc.snapshot(), [], self.alloc)
        rep.reuse = check_reuse(self.alloc)
        return rep


@dataclass
class FinalReport:
    safety: list  # overlap, alignment, size and call-pairing violations
    witness: list  # CAS retries without an intervening foreign write
    final: Verdict = OK
    drained: Verdict = OK
    reuse: Verdict = OK

    @property
    def safe(self):
        """S1 held throughout and the released memory is fully reusable."""
        return not self.safety and not self.witness and self.reuse.ok

    @property
    def exact(self):
        return self.safe and self.final.ok and self.drained.ok

    def problems(self) -> list[str]:
        out = self.safety + self.witness
        for name, v in (("final state", self.final), ("after drain", self.drained),
                        ("reuse", self.reuse)):
            if not v:
                out.append(f"{name}: {v.detail}")
        return out

    def __bool__(self):
        return self.exact


def _worker_main(run: SteppedRun, t: Worker):
    for k, op in enumerate(t.program):
        t.op_index, t.op_steps = k, 0
        run._finish_op(t, k, run._do(t, op))
    t.op_index = len(t.program)
    t.done = True
    t.pending = None


_PLAIN = (int, bool, str, type(None))
_RUN_CODE = _worker_main.__code__


def dump_schedule(path, decisions, header: dict | None = None) -> None:
    with open(path, "w") as fh:
        for k, v in (header or {}).items():
            fh.write(f"# {k}={v}\n")
        for d in decisions:
            if isinstance(d, tuple):
                fh.write(f"freeze {','.join(map(str, d[1]))}\n")
            else:
                fh.write(f"{d}\n")


def load_schedule(path):
    header, decisions = {}, []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                header[k.strip()] = v.strip()
            elif line.startswith("freeze"):
                decisions.append(("freeze", tuple(int(x) for x in line.split()[1].split(","))))
            else:
                decisions.append(int(line.split()[0]))
    return header, decisions
