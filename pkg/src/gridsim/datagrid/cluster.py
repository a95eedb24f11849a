"""In-process cluster: membership, replicated maps, atomic cells, executors.

All state-changing operations on one cluster are serialized by the
cluster's lock, which makes every single-key map operation and every cell
operation linearizable.  Task bodies run on the member's own worker thread
and never hold that lock while they compute.
"""

import itertools
import logging
import threading
from collections import namedtuple
from concurrent.futures import CancelledError, Future, ThreadPoolExecutor

from . import codec
from .errors import (
    ConfigurationError,
    DataUnavailableError,
    MemberLeftError,
    NoSuchMemberError,
)
from .partitions import DEFAULT_PARTITION_COUNT, MemberId, PartitionTable, partition_id
from .store import LocalStore
from .tasks import AllMembers, KeyOwner, TaskContext, TaskEnvelope, TaskResult, ToMember, run_payload

log = logging.getLogger(__name__)

ATOMIC_NAMESPACE = "__atomic__"

CasResult = namedtuple("CasResult", "swapped witnessed")

_INT64_MIN = -(1 << 63)
_INT64_MAX = (1 << 63) - 1


def _check_int64(value):
    if not _INT64_MIN <= value <= _INT64_MAX:
        raise OverflowError(f"{value} does not fit a signed 64-bit cell")
    return value


class Member:
    """A cluster member living in this process with a single worker thread."""

    def __init__(self, cluster, member_id: MemberId, lite=False):
        self.cluster = cluster
        self.id = member_id
        self.lite = lite
        self.store = LocalStore()
        self.alive = True
        self._pool = ThreadPoolExecutor(max_workers=1, thread_name_prefix=str(member_id))
        self._listeners = []

    def __repr__(self):
        return f"Member({self.id}, cluster={self.cluster.name!r})"

    def on_membership_change(self, callback):
        """``callback(event, member_id)`` with event ``"joined"`` or ``"left"``."""
        self._listeners.append(callback)

    def _notify(self, event, member_id):
        for cb in list(self._listeners):
            try:
                cb(event, member_id)
            except Exception:
                log.exception("membership listener failed on %s", self.id)

    def run_task(self, payload: bytes) -> Future:
        ctx = TaskContext(self, self.cluster)

        def body():
            if not self.alive:
                raise MemberLeftError(str(self.id))
            result = run_payload(payload, ctx)
            if not self.alive:
                raise MemberLeftError(str(self.id))
            return result

        try:
            return self._pool.submit(body)
        except RuntimeError:
            fut = Future()
            fut.set_exception(MemberLeftError(str(self.id)))
            return fut

    def local_entries(self, map_name):
        """Primary entries of ``map_name`` stored on this member, decoded."""
        raw = self.store.entries(map_name)
        return {codec.decode(k): codec.decode(v) for k, v in raw.items()}

    def local_get(self, map_name, key):
        """Read an entry from this member's own partitions, without routing."""
        p = partition_id(key, self.cluster.partition_count)
        raw = self.store.get(p, map_name, codec.encode(key))
        return None if raw is None else codec.decode(raw)

    def shutdown(self):
        self.alive = False
        self._pool.shutdown(wait=False, cancel_futures=True)


class GridMap:
    """Handle to a named distributed map; cheap to create and share."""

    def __init__(self, grid, name):
        self.grid = grid
        self.name = name

    def put(self, key, value):
        return self.grid.map_put(self.name, key, value)

    def put_if_absent(self, key, value):
        return self.grid.map_put_if_absent(self.name, key, value)

    def get(self, key, default=None):
        value = self.grid.map_get(self.name, key)
        return default if value is None else value

    def remove(self, key):
        return self.grid.map_remove(self.name, key)

    def __contains__(self, key):
        return self.grid.map_get(self.name, key) is not None

    def items(self):
        return self.grid.map_items(self.name)

    def keys(self):
        return [k for k, _ in self.items()]

    def values(self):
        return [v for _, v in self.items()]

    def __len__(self):
        return len(self.items())

    def clear(self):
        self.grid.map_clear(self.name)


class AtomicCell:
    """Handle to a named linearizable signed 64-bit integer (initially 0)."""

    def __init__(self, grid, name):
        self.grid = grid
        self.name = name

    def get(self):
        return self.grid.atomic_get(self.name)

    def set(self, value):
        self.grid.atomic_set(self.name, value)

    def compare_exchange(self, expected, new) -> CasResult:
        return self.grid.atomic_cas(self.name, expected, new)

    def get_and_set(self, value):
        return self.grid.atomic_get_and_set(self.name, value)

    def add_and_get(self, delta):
        return self.grid.atomic_add(self.name, delta)


class Cluster:
    def __init__(self, name, partition_count=DEFAULT_PARTITION_COUNT, backup_count=0):
        if not name:
            raise ConfigurationError("cluster name must be nonempty")
        if backup_count not in (0, 1):
            raise ConfigurationError("backup_count must be 0 or 1")
        self.name = name
        self.partition_count = partition_count
        self.backup_count = backup_count
        self.table = PartitionTable(partition_count)
        self._lock = threading.RLock()
        self._members = {}
        self._lite = {}
        self._ordinals = itertools.count()
        self._written = set()
        self.lost_partitions = set()

    def __repr__(self):
        return f"Cluster({self.name!r}, members={len(self._members)})"

    # -- membership -------------------------------------------------------

    @property
    def members(self):
        """Data members in ordinal order."""
        with self._lock:
            return [self._members[m] for m in sorted(self._members)]

    @property
    def lite_members(self):
        with self._lock:
            return [self._lite[m] for m in sorted(self._lite)]

    @property
    def member_ids(self):
        with self._lock:
            return sorted(self._members)

    @property
    def master(self):
        """Lowest live ordinal; takes over automatically when the master leaves."""
        with self._lock:
            if not self._members:
                return None
            return self._members[min(self._members)]

    def member(self, member_id):
        if isinstance(member_id, int):
            member_id = MemberId(member_id)
        with self._lock:
            try:
                return self._members[member_id]
            except KeyError:
                raise NoSuchMemberError(str(member_id)) from None

    def _next_id(self, label=None):
        ordinal = next(self._ordinals)
        return MemberId(ordinal, label or f"{self.name}-{ordinal}")

    def join(self, label=None, lite=False) -> Member:
        """Add an in-process member; lite members hold no partitions."""
        with self._lock:
            member = Member(self, self._next_id(label), lite=lite)
        self._attach(member)
        return member

    def _attach(self, member):
        """Register a member object (local or remote proxy) and rebalance."""
        with self._lock:
            prior = list(self._members.values()) + list(self._lite.values())
            if member.lite:
                self._lite[member.id] = member
            else:
                before = self._snapshot_layout()
                self._members[member.id] = member
                self.table.rebalance(self._members)
                self._redistribute(*before)
        for other in prior:
            other._notify("joined", member.id)

    def remove(self, member_or_id):
        """Remove a member abruptly; its partitions recover from replicas."""
        member_id = getattr(member_or_id, "id", member_or_id)
        with self._lock:
            if member_id in self._lite:
                member = self._lite.pop(member_id)
            elif member_id in self._members:
                member = self._members[member_id]
                before = self._snapshot_layout()
                member.alive = False
                del self._members[member_id]
                self.table.rebalance(self._members)
                self._redistribute(*before)
            else:
                raise NoSuchMemberError(str(member_id))
            member.shutdown()
            survivors = list(self._members.values()) + list(self._lite.values())
        for other in survivors:
            other._notify("left", member_id)
        return member

    def shutdown(self):
        with self._lock:
            for member in list(self._members.values()) + list(self._lite.values()):
                member.shutdown()
            self._members.clear()
            self._lite.clear()
            self.table.rebalance([])

    def _snapshot_layout(self):
        owners = list(self.table.assignment)
        members = dict(self._members)
        backups = [self.table.backup_of(p, members) if self.backup_count and owners[p] else None
                   for p in range(self.partition_count)]
        return owners, backups, members

    def _redistribute(self, old_owners, old_backups, old_members):
        live = self._members
        lost = []
        for p in range(self.partition_count):
            new_owner = self.table.assignment[p]
            new_backup = self.table.backup_of(p, live) if (new_owner and self.backup_count) else None
            old_owner, old_backup = old_owners[p], old_backups[p]
            if new_owner == old_owner and new_backup == old_backup:
                continue
            data = None
            if old_owner in live:
                data = live[old_owner].store.export(p)
            elif old_backup in live:
                data = live[old_backup].store.export(p, backup=True)
            elif p in self._written:
                lost.append(p)
            if data is None:
                data = {}
            if old_owner in live and old_owner != new_owner:
                live[old_owner].store.drop(p)
            if old_backup in live and old_backup != new_backup:
                live[old_backup].store.drop(p, backup=True)
            if new_owner is not None and new_owner != old_owner:
                live[new_owner].store.install(p, data)
            if new_backup is not None and (new_backup != old_backup or new_owner != old_owner):
                live[new_backup].store.install(p, data, backup=True)
        if lost:
            self.lost_partitions.update(lost)
            log.error("cluster %s lost %d partitions with no surviving replica", self.name, len(lost))

    @property
    def data_lost(self):
        return bool(self.lost_partitions)

    # -- routing helpers --------------------------------------------------

    def _route(self, key):
        kb = codec.encode(key)
        p = partition_id(key, self.partition_count)
        if p in self.lost_partitions:
            raise DataUnavailableError(f"partition {p} of cluster {self.name!r} was lost")
        if not self._members:
            raise DataUnavailableError(f"cluster {self.name!r} has no members")
        owner = self._members[self.table.owner(p)]
        backup = None
        if self.backup_count:
            backup_id = self.table.backup_of(p, self._members)
            backup = self._members.get(backup_id)
        return kb, p, owner, backup

    def partition_owner(self, key) -> MemberId:
        with self._lock:
            return self.table.owner_of_key(key)

    # -- maps -------------------------------------------------------------

    def get_map(self, name) -> GridMap:
        return GridMap(self, name)

    def _store_put(self, name, key, raw):
        kb, p, owner, backup = self._route(key)
        previous = owner.store.put(p, name, kb, raw)
        if backup is not None:
            backup.store.put(p, name, kb, raw, backup=True)
        self._written.add(p)
        return previous

    def map_put(self, name, key, value):
        with self._lock:
            previous = self._store_put(name, key, codec.encode(value))
            return None if previous is None else codec.decode(previous)

    def map_put_if_absent(self, name, key, value):
        """Store only when absent; returns the existing value otherwise."""
        with self._lock:
            kb, p, owner, _ = self._route(key)
            existing = owner.store.get(p, name, kb)
            if existing is not None:
                return codec.decode(existing)
            self._store_put(name, key, codec.encode(value))
            return None

    def map_get(self, name, key):
        with self._lock:
            kb, p, owner, _ = self._route(key)
            raw = owner.store.get(p, name, kb)
            return None if raw is None else codec.decode(raw)

    def map_remove(self, name, key):
        with self._lock:
            kb, p, owner, backup = self._route(key)
            previous = owner.store.remove(p, name, kb)
            if backup is not None:
                backup.store.remove(p, name, kb, backup=True)
            return None if previous is None else codec.decode(previous)

    def map_items(self, name):
        with self._lock:
            if self.lost_partitions:
                raise DataUnavailableError(f"cluster {self.name!r} lost partitions")
            items = []
            for member in self._members.values():
                for kb, raw in member.store.entries(name).items():
                    items.append((codec.decode(kb), codec.decode(raw)))
            return items

    def map_clear(self, name):
        with self._lock:
            for member in self._members.values():
                member.store.clear_map(name)

    def clear_all(self):
        """Drop every distributed object of this cluster."""
        with self._lock:
            for member in self._members.values():
                member.store.clear()
            self._written.clear()
            self.lost_partitions.clear()

    # -- atomic cells -----------------------------------------------------

    def get_atomic(self, name) -> AtomicCell:
        return AtomicCell(self, name)

    def _cell_read(self, name):
        kb, p, owner, _ = self._route(name)
        raw = owner.store.get(p, ATOMIC_NAMESPACE, kb)
        return 0 if raw is None else codec.decode(raw)

    def _cell_write(self, name, value):
        self._store_put(ATOMIC_NAMESPACE, name, codec.encode(_check_int64(value)))

    def atomic_get(self, name):
        with self._lock:
            return self._cell_read(name)

    def atomic_set(self, name, value):
        with self._lock:
            self._cell_write(name, value)

    def atomic_cas(self, name, expected, new):
        with self._lock:
            current = self._cell_read(name)
            if current == expected:
                self._cell_write(name, new)
                return CasResult(True, current)
            return CasResult(False, current)

    def atomic_get_and_set(self, name, value):
        with self._lock:
            current = self._cell_read(name)
            self._cell_write(name, value)
            return current

    def atomic_add(self, name, delta):
        with self._lock:
            value = self._cell_read(name) + delta
            self._cell_write(name, value)
            return value

    # -- execution --------------------------------------------------------

    def _targets(self, routing):
        with self._lock:
            if isinstance(routing, KeyOwner):
                return [self._members[self.table.owner_of_key(routing.key)]]
            if isinstance(routing, ToMember):
                return [self.member(routing.member)]
            if isinstance(routing, AllMembers):
                return self.members
            raise TypeError(f"unknown routing {routing!r}")

    def submit(self, envelope: TaskEnvelope):
        """Dispatch a task; returns ``[(member_id, future)]`` in ordinal order."""
        return [(m.id, m.run_task(envelope.payload)) for m in self._targets(envelope.routing)]

    def execute(self, envelope: TaskEnvelope, timeout=None):
        return gather(self.submit(envelope), timeout)

    def execute_on_key_owner(self, name, key, **args):
        return self.execute(TaskEnvelope.of(name, KeyOwner(key), **args))[0]

    def execute_on_member(self, member_id, name, **args):
        return self.execute(TaskEnvelope.of(name, ToMember(member_id), **args))[0]

    def execute_on_all(self, name, **args):
        return self.execute(TaskEnvelope.of(name, AllMembers(), **args))


def gather(submitted, timeout=None):
    """Collect ``[(member_id, future)]`` into TaskResults; departures become failures."""
    results = []
    for member_id, fut in submitted:
        try:
            results.append(TaskResult(member_id, fut.result(timeout)))
        except CancelledError:
            results.append(TaskResult(member_id, error=MemberLeftError(str(member_id))))
        except Exception as exc:
            results.append(TaskResult(member_id, error=exc))
    return results


# -- named in-process clusters ---------------------------------------------

_clusters = {}
_clusters_lock = threading.Lock()


def get_cluster(name, **kwargs) -> Cluster:
    """Return the in-process cluster registered under ``name``, creating it."""
    with _clusters_lock:
        cluster = _clusters.get(name)
        if cluster is None:
            cluster = _clusters[name] = Cluster(name, **kwargs)
        return cluster


def drop_cluster(name):
    with _clusters_lock:
        cluster = _clusters.pop(name, None)
    if cluster is not None:
        cluster.shutdown()
