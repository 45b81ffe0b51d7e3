"""Explore every interleaving of the small two-thread programs and classify end states.

Writes the first failing schedule of each instance to --out for replay with
``nbbuddy verify --schedule FILE``.
"""

import argparse
import os

from nbbuddy import TreeConfig
from nbbuddy.verify import dump_schedule, explore, small_programs, small_setups


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--depths", nargs="+", type=int, default=[1, 2, 3])
    p.add_argument("--variants", nargs="+", default=["1lvl-nb", "4lvl-nb"])
    p.add_argument("--out", default="repro")
    args = p.parse_args(argv)

    print(f"{'variant':8s} {'depth':>5s} {'prog':>4s} {'states':>7s} {'ends':>5s} "
          f"{'unsafe':>6s} {'coal':>5s} {'occ':>5s} {'secs':>6s}")
    for depth in args.depths:
        cfg = TreeConfig.with_depth(depth)
        for v in args.variants:
            for k, (progs, setup) in enumerate(zip(small_programs(cfg), small_setups(cfg))):
                r = explore(v, cfg, progs, setup)
                print(f"{v:8s} {depth:5d} {k:4d} {r.states:7d} {r.terminals:5d} {r.unsafe:6d} "
                      f"{r.stale_coal:5d} {r.stale_occupancy:5d} {r.seconds:6.1f}")
                if r.failures:
                    os.makedirs(args.out, exist_ok=True)
                    decisions, problems = r.failures[0]
                    path = os.path.join(args.out, f"explore-{v}-d{depth}-p{k}.sched")
                    dump_schedule(path, decisions, {"mode": "explore", "variant": v,
                                                    "depth": depth, "program": k})
                    print(f"    {problems[0]}  -> {path}")


if __name__ == "__main__":
    main()
