from __future__ import annotations

from .buddy import NBBuddy
from .geometry import TreeConfig
from .locked import LockedBuddy
from .packed import PackedBuddy
from .words import AtomicWords

VARIANTS = ("1lvl-nb", "4lvl-nb", "1lvl-sl", "4lvl-sl")


def make_allocator(variant: str, cfg: TreeConfig, debug: bool = False, words=AtomicWords):
    """Build an allocator by its benchmark name."""
    if variant == "1lvl-nb":
        return NBBuddy(cfg, words=words, debug=debug)
    if variant == "4lvl-nb":
        return PackedBuddy(cfg, words=words, debug=debug)
    if variant in ("1lvl-sl", "4lvl-sl"):
        return LockedBuddy(cfg, layout=variant[:4], debug=debug)
    raise ValueError(f"unknown variant {variant!r}; expected one of {', '.join(VARIANTS)}")
