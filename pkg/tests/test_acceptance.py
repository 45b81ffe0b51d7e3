"""Acceptance criteria, one test and one PASS/FAIL line each.

Full size by default.  ``NBBUDDY_ACCEPTANCE_SCALE=0.05`` shrinks the seed and
trace counts for a quick look; time limits are then scaled the same way and
the printed line says so.
"""

import os
import time

import pytest

from conftest import ACCEPTANCE_LINES
from nbbuddy import TreeConfig, make_allocator
from nbbuddy.bench import BenchConfig, run
from nbbuddy.verify import (
    SequentialOracle,
    StressConfig,
    differential_trace,
    explore,
    random_trace,
    scenarios,
    small_programs,
    small_setups,
    solo_progress,
    stress,
)
from nbbuddy.verify.stress import SafetyViolation
from nbbuddy.words import RecordingWords

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

SCALE = float(os.environ.get("NBBUDDY_ACCEPTANCE_SCALE", "1"))
NB = ("1lvl-nb", "4lvl-nb")

# pinned thresholds
STRESS_THREADS, STRESS_OPS, STRESS_SEEDS, STRESS_LIMIT_S = 8, 100_000, 20, 60.0
TRACES, TRACE_STEPS, TRACE_LIMIT_S = 1000, 10_000, 30.0
EXHAUSTIVE_DEPTHS, EXHAUSTIVE_LIMIT_S = (1, 2, 3), 300.0
SOLO_SCHEDULES, SOLO_DEPTH = 100, 5
RMW_DEPTH, RMW_EXPECTED = 16, {"1lvl-nb": 16, "4lvl-nb": 4}
PERF_OPS, PERF_SIZE = 1_000_000, 8


def scaled(n):
    return max(1, round(n * SCALE))


def report(key, name, ok, detail):
    note = "" if SCALE == 1 else f" [scale {SCALE}]"
    line = f"{'PASS' if ok else 'FAIL'}  {key} {name}: {detail}{note}"
    ACCEPTANCE_LINES[key] = line
    print(line)
    return ok


class AlignmentAudit:
    """Pass-through allocator wrapper that counts grants and misaligned offsets."""

    def __init__(self, alloc):
        self._a = alloc
        self.variant = getattr(alloc, "variant", type(alloc).__name__)
        self.grants = self.misaligned = 0

    def alloc(self, size, hint=None):
        r = self._a.alloc(size, hint)
        if r is not None:
            self.grants += 1
            self.misaligned += bool((r.offset - self._a.cfg.base_offset) % r.size)
        return r

    def free(self, offset):
        self._a.free(offset)


# suites, computed once and shared with the alignment criterion ---------------

@pytest.fixture(scope="module")
def safety_suite():
    out = {"reports": [], "violations": [], "grants": 0, "misaligned": 0}
    t0 = time.perf_counter()
    for variant in NB:
        for seed in range(scaled(STRESS_SEEDS)):
            cfg = StressConfig(variant=variant, threads=STRESS_THREADS, ops=scaled(STRESS_OPS),
                               min_size=8, max_size=1024, total_memory=16384, seed=seed)
            try:
                rep = stress(cfg)
            except SafetyViolation as e:
                out["violations"].append(f"{variant}: {e}")
                continue
            out["reports"].append(rep)
            out["grants"] += rep.grants
            out["misaligned"] += rep.misaligned
    out["seconds"] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="module")
def oracle_suite():
    cfg = TreeConfig.with_depth(11)
    out = {"divergences": [], "grants": 0, "misaligned": 0}
    t0 = time.perf_counter()
    for seed in range(scaled(TRACES)):
        allocs = [AlignmentAudit(SequentialOracle(cfg))] + \
                 [AlignmentAudit(make_allocator(v, cfg)) for v in NB + ("1lvl-sl", "4lvl-sl")]
        d = differential_trace(random_trace(cfg, TRACE_STEPS, seed), *allocs)
        if d is not None:
            out["divergences"].append(f"seed {seed}: {d}")
        out["grants"] += sum(a.grants for a in allocs)
        out["misaligned"] += sum(a.misaligned for a in allocs)
    out["seconds"] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="module")
def exhaustive_suite():
    out = {"runs": [], "misaligned": 0}
    t0 = time.perf_counter()
    for depth in EXHAUSTIVE_DEPTHS:
        cfg = TreeConfig.with_depth(depth)
        for variant in NB:
            for k, (progs, setup) in enumerate(zip(small_programs(cfg), small_setups(cfg))):
                rep = explore(variant, cfg, progs, setup)
                out["runs"].append((depth, variant, k, rep))
                out["misaligned"] += sum("aligned" in p for _, ps in rep.failures for p in ps)
    out["seconds"] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="module")
def solo_suite():
    out = {"reports": []}
    t0 = time.perf_counter()
    for variant in NB:
        for scn in scenarios(SOLO_DEPTH):
            out["reports"].append(solo_progress(scn, variant, scaled(SOLO_SCHEDULES), seed=0))
    out["seconds"] = time.perf_counter() - t0
    out["misaligned"] = sum("aligned" in v for r in out["reports"] for v in r.safety)
    return out


# criteria --------------------------------------------------------------------

def test_c1_safety_suite(safety_suite):
    s = safety_suite
    reps = s["reports"]
    runs = len(NB) * scaled(STRESS_SEEDS)
    functional = not s["violations"] and len(reps) == runs and all(r.ok for r in reps)
    limit = STRESS_LIMIT_S * (SCALE if SCALE < 1 else 1)
    in_time = s["seconds"] <= limit
    ops = sum(r.ops for r in reps)
    detail = (f"{len(reps)}/{runs} runs clean, {ops} ops, {s['grants']} grants, "
              f"{len(s['violations'])} violations, misaligned={s['misaligned']}; "
              f"{s['seconds']:.1f}s (limit {limit:.0f}s)")
    if s["violations"]:
        detail += f"; first: {s['violations'][0]}"
    ok = report("C1", "safety suite", functional and in_time, detail)
    assert ok


def test_c2_oracle_equivalence(oracle_suite):
    s = oracle_suite
    limit = TRACE_LIMIT_S * (SCALE if SCALE < 1 else 1)
    functional = not s["divergences"]
    detail = (f"{scaled(TRACES)} traces x {TRACE_STEPS} steps, 5 implementations, "
              f"{len(s['divergences'])} divergences; {s['seconds']:.1f}s (limit {limit:.0f}s)")
    if s["divergences"]:
        detail += f"; first: {s['divergences'][0]}"
    ok = report("C2", "oracle equivalence", functional and s["seconds"] <= limit, detail)
    assert ok


def test_c3_exhaustive(exhaustive_suite):
    s = exhaustive_suite
    bad = [(d, v, k, r) for d, v, k, r in s["runs"] if not r.ok]
    states = sum(r.states for *_, r in s["runs"])
    ends = sum(r.terminals for *_, r in s["runs"])
    parts = [f"{v} d{d} p{k}: unsafe={r.unsafe} stale_coal={r.stale_coal} "
             f"stale_occupancy={r.stale_occupancy} of {r.terminals}" for d, v, k, r in bad]
    detail = (f"{len(s['runs'])} instances, {states} states, {ends} end states, "
              f"{len(bad)} with failing end states; {s['seconds']:.1f}s (limit "
              f"{EXHAUSTIVE_LIMIT_S:.0f}s)")
    if parts:
        detail += "; " + "; ".join(parts)
    ok = report("C3", "exhaustive small instances", not bad and s["seconds"] <= EXHAUSTIVE_LIMIT_S,
                detail)
    assert ok


def test_c4_solo_progress(solo_suite):
    reps = solo_suite["reports"]
    stuck = sum(len(r.stuck) for r in reps)
    short = [f"{r.variant}/{r.scenario}" for r in reps if r.schedules < scaled(SOLO_SCHEDULES)]
    witness = sum(len(r.witness_failures) for r in reps)
    worst = max(r.worst_ratio for r in reps)
    detail = (f"{len(reps)} families x {scaled(SOLO_SCHEDULES)} schedules, stuck={stuck}, "
              f"witness failures={witness}, worst steps/budget={worst:.3f}; "
              f"{solo_suite['seconds']:.1f}s")
    if short:
        detail += f"; too few schedules reached the window: {short}"
    ok = report("C4", "solo progress", not stuck and not short and all(r.ok for r in reps), detail)
    assert ok


def _climb_counts(variant):
    a = make_allocator(variant, TreeConfig.with_depth(RMW_DEPTH), words=RecordingWords)
    words = a.tree if variant == "1lvl-nb" else a.bunches
    home = (lambda n: n) if variant == "1lvl-nb" else (lambda n: a.node_bunch[n])
    words.log.clear()
    r = a.alloc(8, hint=0)
    target = home(r.node)
    alloc_climb = sum(1 for k, i, _ in words.log if k == "cas" and i != target)
    words.log.clear()
    a.free(r.offset)
    log = [(k, i) for k, i, _ in words.log if k != "load"]
    release = next(j for j, (_, i) in enumerate(log) if i == target)
    mark = sum(1 for k, i in log[:release] if k == "cas")
    unmark = sum(1 for k, i in log[release + 1:] if k == "cas")
    return alloc_climb, mark, unmark


def test_c5_rmw_count():
    got = {v: _climb_counts(v) for v in NB}
    ok = all(c == (RMW_EXPECTED[v],) * 3 for v, c in got.items())
    detail = "; ".join(f"{v}: alloc climb {c[0]}, free marking climb {c[1]}, unmark climb {c[2]} "
                       f"(want {RMW_EXPECTED[v]})" for v, c in got.items())
    assert report("C5", "RMW count at depth 16", ok, detail)


def test_c6_directional_performance():
    threads = max(8, os.cpu_count() or 1)
    ops = scaled(PERF_OPS)
    tput = {}
    for variant in ("1lvl-nb", "1lvl-sl"):
        for t in (1, threads):
            rep = run(BenchConfig("linux-scalability", variant, threads=t, size=PERF_SIZE, ops=ops))
            assert rep.ops == ops
            tput[variant, t] = rep.throughput
    r1 = tput["1lvl-nb", 1] / tput["1lvl-sl", 1]
    rmax = tput["1lvl-nb", threads] / tput["1lvl-sl", threads]
    ok = rmax >= 1.0 and rmax >= r1
    detail = (f"{ops} pairs of {PERF_SIZE} B; 1 thread: nb {tput['1lvl-nb', 1]:.0f}/s, "
              f"sl {tput['1lvl-sl', 1]:.0f}/s, ratio {r1:.2f}; {threads} threads: "
              f"nb {tput['1lvl-nb', threads]:.0f}/s, sl {tput['1lvl-sl', threads]:.0f}/s, "
              f"ratio {rmax:.2f}")
    assert report("C6", "directional performance", ok, detail)


def test_c7_alignment(safety_suite, oracle_suite, exhaustive_suite, solo_suite):
    grants = safety_suite["grants"] + oracle_suite["grants"]
    bad = {"stress": safety_suite["misaligned"], "traces": oracle_suite["misaligned"],
           "exhaustive": exhaustive_suite["misaligned"], "solo": solo_suite["misaligned"]}
    detail = (f"{grants} audited grants in stress and traces, plus every grant in the "
              f"interleaving suites; misaligned: " + ", ".join(f"{k}={v}" for k, v in bad.items()))
    assert report("C7", "alignment", not any(bad.values()), detail)
