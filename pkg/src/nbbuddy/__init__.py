"""Lock-free buddy-system allocator built on single-word compare-and-swap."""

from .buddy import AllocResult, NBBuddy
from .geometry import (
    AllocatorError,
    ConfigError,
    InvalidAddress,
    RequestTooLarge,
    TreeConfig,
)
from .locked import LockedBuddy, SpinLock
from .packed import PackedBuddy
from .variants import VARIANTS, make_allocator

__all__ = [
    "AllocResult",
    "AllocatorError",
    "ConfigError",
    "InvalidAddress",
    "LockedBuddy",
    "NBBuddy",
    "PackedBuddy",
    "RequestTooLarge",
    "SpinLock",
    "TreeConfig",
    "VARIANTS",
    "make_allocator",
]
