"""Key hashing and the partition -> member assignment table."""

from dataclasses import dataclass, field

from . import codec

DEFAULT_PARTITION_COUNT = 271

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True, order=True)
class MemberId:
    ordinal: int
    label: str = field(default="", compare=False)

    def __str__(self):
        return self.label or f"member-{self.ordinal}"


codec.register_record(MemberId)


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def key_bytes(key) -> bytes:
    """Bytes used for hashing a key; raw bytes keys hash as themselves."""
    if isinstance(key, (bytes, bytearray)):
        return bytes(key)
    return codec.encode(key)


def partition_of_hash(h: int, partition_count: int) -> int:
    return h % partition_count


def partition_id(key, partition_count: int = DEFAULT_PARTITION_COUNT) -> int:
    return partition_of_hash(fnv1a_64(key_bytes(key)), partition_count)


class PartitionTable:
    """Assignment of every partition index to exactly one live member.

    Rebalancing keeps every partition whose owner is still alive and within
    its quota where it is; only orphaned and surplus partitions move.
    """

    def __init__(self, partition_count: int = DEFAULT_PARTITION_COUNT):
        if partition_count < 1:
            raise ValueError("partition_count must be positive")
        self.partition_count = partition_count
        self.assignment: list = [None] * partition_count

    def owner(self, partition: int) -> MemberId:
        owner = self.assignment[partition]
        if owner is None:
            raise LookupError("partition table has no members")
        return owner

    def owner_of_key(self, key) -> MemberId:
        return self.owner(partition_id(key, self.partition_count))

    def counts(self) -> dict:
        result = {}
        for owner in self.assignment:
            if owner is not None:
                result[owner] = result.get(owner, 0) + 1
        return result

    def partitions_of(self, member: MemberId) -> list:
        return [p for p, owner in enumerate(self.assignment) if owner == member]

    def rebalance(self, members) -> list:
        """Reassign partitions over ``members``; returns ``(p, old, new)`` moves."""
        members = sorted(members)
        if not members:
            self.assignment = [None] * self.partition_count
            return []
        live = set(members)
        owned = {m: [] for m in members}
        pool = []
        for p, owner in enumerate(self.assignment):
            if owner in live:
                owned[owner].append(p)
            else:
                pool.append(p)

        base, extra = divmod(self.partition_count, len(members))
        # The +1 quotas go to the members already holding the most, so the
        # fewest partitions have to move.
        by_load = sorted(members, key=lambda m: (-len(owned[m]), m.ordinal))
        quota = {m: base + (1 if i < extra else 0) for i, m in enumerate(by_load)}

        for m in members:
            surplus = len(owned[m]) - quota[m]
            if surplus > 0:
                owned[m].sort()
                pool.extend(owned[m][-surplus:])
                del owned[m][-surplus:]
        pool.sort()

        moves = []
        it = iter(pool)
        for m in members:
            while len(owned[m]) < quota[m]:
                p = next(it)
                old = self.assignment[p]
                self.assignment[p] = m
                owned[m].append(p)
                moves.append((p, old, m))
        return moves

    def backup_of(self, partition: int, members) -> MemberId:
        """Next member after the owner in ordinal order, or None if alone."""
        members = sorted(members)
        if len(members) < 2:
            return None
        owner = self.owner(partition)
        idx = members.index(owner)
        return members[(idx + 1) % len(members)]
