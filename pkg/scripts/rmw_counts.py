"""Climb CAS counts of one leaf alloc/free in an empty tree, per depth and layout."""

import argparse

from nbbuddy import TreeConfig, make_allocator
from nbbuddy.words import RecordingWords


def counts(variant, depth):
    a = make_allocator(variant, TreeConfig.with_depth(depth), words=RecordingWords)
    words = a.tree if variant == "1lvl-nb" else a.bunches
    words.log.clear()
    r = a.alloc(8, hint=0)
    n_alloc = sum(k == "cas" for k, _, _ in words.log)
    words.log.clear()
    a.free(r.offset)
    n_free = sum(k == "cas" for k, _, _ in words.log)
    return n_alloc, n_free


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--max-depth", type=int, default=20)
    args = p.parse_args(argv)
    print("depth  1lvl alloc/free  4lvl alloc/free  (CAS on status words, target included)")
    for d in range(1, args.max_depth + 1):
        a1, f1 = counts("1lvl-nb", d)
        a4, f4 = counts("4lvl-nb", d)
        print(f"{d:5d}  {a1:6d}/{f1:<8d} {a4:6d}/{f4:<8d}")


if __name__ == "__main__":
    main()
