"""Minimal in-memory data grid: membership, partitioned maps, atomic cells, tasks."""

from dataclasses import dataclass

from .cluster import AtomicCell, CasResult, Cluster, GridMap, Member, drop_cluster, gather, get_cluster
from .errors import (
    ConfigurationError,
    DataUnavailableError,
    GridError,
    JoinError,
    MemberLeftError,
    NoSuchMemberError,
    UnknownTaskError,
)
from .partitions import DEFAULT_PARTITION_COUNT, MemberId, PartitionTable, fnv1a_64, partition_id
from .tasks import AllMembers, KeyOwner, TaskContext, TaskEnvelope, TaskResult, ToMember, task


@dataclass(frozen=True)
class InProcess:
    pass


@dataclass(frozen=True)
class Tcp:
    endpoints: tuple


def join_cluster(cluster_name, transport=InProcess(), **cluster_options):
    """Join the named cluster and return the new member id(s).

    In-process members join the process-wide cluster registered under the
    name.  For :class:`Tcp`, every endpoint is attached as a remote member and
    the list of their ids is returned.
    """
    if not cluster_name:
        raise ConfigurationError("cluster name must be nonempty")
    cluster = get_cluster(cluster_name, **cluster_options)
    if isinstance(transport, Tcp):
        from .tcp import join_tcp
        return [m.id for m in join_tcp(cluster, list(transport.endpoints))]
    return cluster.join().id


def partition_owner(key, table: PartitionTable) -> MemberId:
    return table.owner_of_key(key)
