"""Contiguous entity ranges owned by each member, computed from join offsets.

Each member gets ``ceil(total / parallel)`` consecutive ids starting at
``offset * ceil(total / parallel)``; both ends are clamped to ``total`` so
trailing members may get an empty range but never an inverted one.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class PartitionRange:
    init: int
    final: int

    def __post_init__(self):
        if not 0 <= self.init <= self.final:
            raise ValueError(f"invalid range [{self.init}, {self.final})")

    def __iter__(self):
        return iter(range(self.init, self.final))

    def __len__(self):
        return self.final - self.init

    def __contains__(self, index):
        return self.init <= index < self.final


def _chunk(total, offset, parallel):
    if total < 1:
        raise ValueError("totalEntities must be positive")
    if parallel < 1:
        raise ValueError("parallelCount must be positive")
    if not 0 <= offset < parallel:
        raise ValueError(f"offset {offset} outside [0, {parallel})")
    return -(-total // parallel)


def partition_init(total: int, offset: int, parallel: int) -> int:
    return min(total, offset * _chunk(total, offset, parallel))


def partition_final(total: int, offset: int, parallel: int) -> int:
    return min(total, (offset + 1) * _chunk(total, offset, parallel))


def partition_range(total: int, offset: int, parallel: int) -> PartitionRange:
    return PartitionRange(partition_init(total, offset, parallel),
                          partition_final(total, offset, parallel))


def deployment_offsets(member_ids) -> dict:
    """Offset of each live member: how many live members joined before it."""
    return {m: i for i, m in enumerate(sorted(member_ids))}
