"""Tree geometry and status-bit helpers shared by every allocator variant.

Nodes are numbered heap-style: the root is 1, the children of ``n`` are
``2n`` and ``2n + 1``, and level ``L`` holds nodes ``[2**L, 2**(L+1) - 1]``.
All arithmetic is integer-only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

OCC_RIGHT = 0x1
OCC_LEFT = 0x2
COAL_RIGHT = 0x4
COAL_LEFT = 0x8
OCC = 0x10
BUSY = OCC | OCC_LEFT | OCC_RIGHT
STATUS_MASK = 0x1F

MAX_DEPTH = 31


class AllocatorError(Exception):
    pass


class ConfigError(AllocatorError, ValueError):
    pass


class RequestTooLarge(AllocatorError, ValueError):
    pass


class InvalidAddress(AllocatorError, ValueError):
    pass


def _is_pow2(x: int) -> bool:
    return x > 0 and x & (x - 1) == 0


@dataclass(frozen=True)
class TreeConfig:
    """Immutable geometry of a managed region.

    ``min_size`` is the allocation unit (a leaf), ``max_size`` the largest
    chunk a single request may obtain.  ``max_size`` defaults to the whole
    region.
    """

    total_memory: int
    min_size: int
    max_size: int | None = None
    base_offset: int = 0
    depth: int = field(init=False)
    max_level: int = field(init=False)

    def __post_init__(self):
        if self.max_size is None:
            object.__setattr__(self, "max_size", self.total_memory)
        for name in ("total_memory", "min_size", "max_size"):
            if not _is_pow2(getattr(self, name)):
                raise ConfigError(f"{name}={getattr(self, name)} is not a power of two")
        if not self.min_size <= self.max_size <= self.total_memory:
            raise ConfigError("need min_size <= max_size <= total_memory")
        if self.base_offset < 0:
            raise ConfigError("base_offset must be non-negative")
        depth = (self.total_memory // self.min_size).bit_length() - 1
        if not 1 <= depth <= MAX_DEPTH:
            raise ConfigError(f"depth {depth} outside [1, {MAX_DEPTH}]")
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "max_level", (self.total_memory // self.max_size).bit_length() - 1)

    @classmethod
    def with_depth(cls, depth: int, min_size: int = 8, max_size: int | None = None,
                   base_offset: int = 0) -> "TreeConfig":
        if not 1 <= depth <= MAX_DEPTH:
            raise ConfigError(f"depth {depth} outside [1, {MAX_DEPTH}]")
        return cls(min_size << depth, min_size, max_size, base_offset)

    @property
    def n_nodes(self) -> int:
        return (1 << (self.depth + 1)) - 1

    @property
    def n_slots(self) -> int:
        return 1 << self.depth

    # thin method forms so callers holding a config need no extra imports
    def size_of(self, n: int) -> int:
        return size_of(n, self)

    def offset_of(self, n: int) -> int:
        return offset_of(n, self)

    def target_level(self, size: int) -> int:
        return target_level(size, self)

    def index_slot(self, offset: int) -> int:
        return index_slot(offset, self)


def level_of(n: int) -> int:
    return n.bit_length() - 1


def size_of(n: int, cfg: TreeConfig) -> int:
    return cfg.total_memory >> level_of(n)


def offset_of(n: int, cfg: TreeConfig) -> int:
    level = level_of(n)
    return cfg.base_offset + (n - (1 << level)) * (cfg.total_memory >> level)


def target_level(size: int, cfg: TreeConfig) -> int:
    """Level whose chunks are the smallest ones that still fit ``size``.

    Requests of size 0 are served by an allocation unit.
    """
    if size > cfg.max_size:
        raise RequestTooLarge(f"request of {size} bytes exceeds max_size={cfg.max_size}")
    if size <= 0:
        return cfg.depth
    # floor(log2(total / size)) == floor(log2(total // size)) for total >= size
    return min((cfg.total_memory // size).bit_length() - 1, cfg.depth)


def level_nodes(level: int) -> tuple[int, int]:
    return 1 << level, (1 << (level + 1)) - 1


def buddy(n: int) -> int:
    return n ^ 1


def index_slot(offset: int, cfg: TreeConfig) -> int:
    rel = offset - cfg.base_offset
    if rel < 0 or rel >= cfg.total_memory or rel % cfg.min_size:
        raise InvalidAddress(f"offset {offset:#x} is not an allocation-unit address")
    return rel // cfg.min_size


# Status-bit helpers.  ``child`` is the node the climb arrived from; an even
# index is a left child and selects the LEFT masks.

def clean_coal(val: int, child: int) -> int:
    return val & ~(COAL_LEFT >> (child & 1))


def mark(val: int, child: int) -> int:
    return val | (OCC_LEFT >> (child & 1))


def unmark(val: int, child: int) -> int:
    return val & ~((OCC_LEFT | COAL_LEFT) >> (child & 1))


def is_coal(val: int, child: int) -> bool:
    return bool(val & (COAL_LEFT >> (child & 1)))


def is_occ_buddy(val: int, child: int) -> bool:
    return bool(val & (OCC_RIGHT << (child & 1)))


def is_coal_buddy(val: int, child: int) -> bool:
    return bool(val & (COAL_RIGHT << (child & 1)))


def is_free(val: int) -> bool:
    return not val & BUSY


def skip_subtree(i: int, failed_at: int) -> int:
    """First node on ``i``'s level to the right of ``failed_at``'s subtree."""
    return (failed_at + 1) << (level_of(i) - level_of(failed_at))
