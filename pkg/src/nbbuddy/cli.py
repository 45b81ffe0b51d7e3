"""Command line: ``nbbuddy bench ...`` and ``nbbuddy verify ...``."""

from __future__ import annotations

import argparse
import os
import sys

from .bench import WORKLOADS, BenchConfig, emit_report, run
from .geometry import ConfigError, TreeConfig
from .variants import VARIANTS

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _bench(args) -> int:
    try:
        cfg = BenchConfig(
            workload=args.workload, variant=args.variant, threads=args.threads, size=args.size,
            ops=args.ops, duration=args.duration, min_size=args.min_size, max_size=args.max_size,
            total_memory=args.total_memory, seed=args.seed, pin=args.pin, touch=args.touch)
        cfg.tree()
        rep = run(cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.csv:
        new = not os.path.exists(args.csv) or os.path.getsize(args.csv) == 0
        with open(args.csv, "a") as fh:
            if new:
                emit_report([rep], fh)
            else:
                fh.write(",".join(rep.row()) + "\n")
    emit_report([rep], sys.stdout)
    return EXIT_OK


def _write_repro(outdir, name, decisions, header) -> str:
    from .verify.stepped import dump_schedule

    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, name)
    dump_schedule(path, decisions, header)
    return path


def _verify_exhaustive(args) -> int:
    from .verify.explore import explore, small_programs, small_setups

    if args.depth > 3:
        print("warning: exhaustive exploration is sized for depth <= 3", file=sys.stderr)
    cfg = TreeConfig.with_depth(args.depth)
    bad = 0
    for variant in _nb_variants(args.variant):
        for k, (progs, setup) in enumerate(zip(small_programs(cfg), small_setups(cfg))):
            rep = explore(variant, cfg, progs, setup)
            print(f"{variant} program {k}: {rep.states} states, {rep.terminals} end states, "
                  f"unsafe={rep.unsafe} stale_coal={rep.stale_coal} "
                  f"stale_occupancy={rep.stale_occupancy} ({rep.seconds:.1f}s)")
            if rep.failures:
                bad += 1
                decisions, problems = rep.failures[0]
                path = _write_repro(args.out, f"explore-{variant}-d{args.depth}-p{k}.sched", decisions,
                                    {"mode": "explore", "variant": variant, "depth": args.depth,
                                     "program": k})
                print(f"  first failing schedule -> {path}: {problems[0]}")
    return EXIT_FAIL if bad else EXIT_OK


def _verify_solo(args) -> int:
    from .verify.progress import scenarios, solo_progress

    fams = {s.name: s for s in scenarios(max(args.depth, 2))}
    names = list(fams) if args.schedule == "all" else [args.schedule]
    bad = 0
    for variant in _nb_variants(args.variant):
        for name in names:
            rep = solo_progress(fams[name], variant, args.schedules, args.seed)
            print(f"{variant} {name}: {rep.schedules} schedules, stuck={len(rep.stuck)}, "
                  f"worst steps/budget={rep.worst_ratio:.3f}, retries={rep.retries}, "
                  f"witness failures={len(rep.witness_failures)}")
            if not rep.ok:
                bad += 1
            for out in rep.stuck[:1]:
                path = _write_repro(args.out, f"solo-{variant}-{name}-{out.seed}.sched", out.decisions,
                                    {"mode": "solo", "variant": variant, "depth": max(args.depth, 2),
                                     "scenario": name, "seed": out.seed})
                print(f"  stuck schedule -> {path}")
    return EXIT_FAIL if bad else EXIT_OK


def _verify_replay(args) -> int:
    from .verify.explore import small_programs, small_setups
    from .verify.progress import scenarios
    from .verify.stepped import SteppedRun, load_schedule

    header, decisions = load_schedule(args.schedule)
    variant, depth = header["variant"], int(header["depth"])
    cfg = TreeConfig.with_depth(depth)
    if header.get("mode") == "solo":
        scn = {s.name: s for s in scenarios(depth)}[header["scenario"]]
        run_ = SteppedRun(variant, cfg, scn.programs, scn.setup, scn.hints)
    else:
        k = int(header["program"])
        run_ = SteppedRun(variant, cfg, small_programs(cfg)[k], small_setups(cfg)[k])
    for d in decisions:
        run_.apply(d)
    if not run_.finished:
        print(f"replayed {len(decisions)} decisions; threads still running: {run_.runnable()}")
        return EXIT_OK
    fin = run_.final_checks()
    for p in fin.problems():
        print(p)
    print("ok" if fin else "FAILED")
    return EXIT_OK if fin else EXIT_FAIL


def _verify_stress(args) -> int:
    from .verify.stress import SafetyViolation, StressConfig, stress

    variants = VARIANTS if args.variant == "all" else [args.variant]
    for variant in variants:
        cfg = StressConfig(variant=variant, threads=args.threads, ops=args.ops, seed=args.seed,
                           total_memory=8 << args.depth, max_size=min(1024, 8 << args.depth))
        try:
            rep = stress(cfg)
        except SafetyViolation as e:
            print(f"{variant}: VIOLATION {e}")
            path = os.path.join(args.out, f"stress-{variant}-{args.seed}.seed")
            os.makedirs(args.out, exist_ok=True)
            with open(path, "w") as fh:
                fh.write(f"# variant={variant}\n# threads={args.threads}\n# ops={args.ops}\n"
                         f"# depth={args.depth}\nseed {e.seed}\n")
            return EXIT_FAIL
        print(f"{variant}: ok, {rep.ops} ops, {rep.grants} grants, {rep.exhausted} exhausted, "
              f"{rep.cas_failures} CAS retries, {rep.seconds:.1f}s")
    return EXIT_OK


def _nb_variants(v):
    if v == "all":
        return ["1lvl-nb", "4lvl-nb"]
    if not v.endswith("-nb"):
        raise ConfigError("interleaving checks need a non-blocking variant")
    return [v]


def _verify(args) -> int:
    try:
        if args.exhaustive:
            return _verify_exhaustive(args)
        if args.schedule and os.path.exists(args.schedule):
            return _verify_replay(args)
        if args.schedule:
            return _verify_solo(args)
        return _verify_stress(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nbbuddy", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    b = sub.add_parser("bench", help="run an allocation workload and print a CSV row")
    b.add_argument("--workload", choices=WORKLOADS, default="linux-scalability")
    b.add_argument("--variant", choices=VARIANTS, default="1lvl-nb")
    b.add_argument("--threads", type=int, default=1)
    b.add_argument("--size", type=int, default=8, help="request size in bytes")
    b.add_argument("--min-size", type=int, default=8)
    b.add_argument("--max-size", type=int, default=16384)
    b.add_argument("--total-memory", type=int, default=1 << 20)
    g = b.add_mutually_exclusive_group()
    g.add_argument("--ops", type=int)
    g.add_argument("--duration", type=float, help="seconds (larson)")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--csv", help="append the result row to this file")
    b.add_argument("--pin", action="store_true", help="bind threads to cores round-robin")
    b.add_argument("--touch", action="store_true", help="write one byte into every granted chunk")
    b.set_defaults(func=_bench)

    v = sub.add_parser("verify", help="safety and progress checks")
    v.add_argument("--variant", default="all", choices=list(VARIANTS) + ["all"])
    v.add_argument("--depth", type=int, default=11)
    v.add_argument("--threads", type=int, default=8)
    v.add_argument("--ops", type=int, default=100_000, help="per thread (stress)")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--schedule", help="solo-progress family name, 'all', or a schedule file to replay")
    v.add_argument("--schedules", type=int, default=100, help="random schedules per family")
    v.add_argument("--exhaustive", action="store_true", help="explore all interleavings (small depth)")
    v.add_argument("--out", default="repro", help="directory for failure reproducers")
    v.set_defaults(func=_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
