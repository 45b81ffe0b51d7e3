"""Throughput of every variant across thread counts, one CSV row per run.

    python3 scripts/scalability_sweep.py --workload linux-scalability \
        --threads 1 2 4 8 --ops 200000 --out sweep.csv
"""

import argparse
import sys

from nbbuddy.bench import WORKLOADS, BenchConfig, emit_report, run
from nbbuddy.variants import VARIANTS


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--workload", choices=WORKLOADS, default="linux-scalability")
    p.add_argument("--variants", nargs="+", default=list(VARIANTS), choices=VARIANTS)
    p.add_argument("--threads", nargs="+", type=int, default=[1, 2, 4, 8])
    p.add_argument("--size", type=int, default=8)
    p.add_argument("--ops", type=int)
    p.add_argument("--duration", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV path (stdout when omitted)")
    args = p.parse_args(argv)

    reports = []
    for t in args.threads:
        for v in args.variants:
            rep = run(BenchConfig(args.workload, v, threads=t, size=args.size, ops=args.ops,
                                  duration=args.duration, seed=args.seed))
            print(f"{v:8s} threads={t:<3d} {rep.throughput:12.0f} ops/s  "
                  f"retries={rep.cas_retries}", file=sys.stderr)
            reports.append(rep)
    if args.out:
        with open(args.out, "w") as fh:
            emit_report(reports, fh)
    else:
        emit_report(reports, sys.stdout)


if __name__ == "__main__":
    main()
