"""Worker instances a node spawns into a tenant's simulation cluster."""

import enum
import itertools
import logging
from dataclasses import dataclass

from ..datagrid import MemberId

log = logging.getLogger(__name__)


class InstanceState(str, enum.Enum):
    RUNNING = "running"
    SHUTTING_DOWN = "shuttingDown"
    STOPPED = "stopped"


class BudgetExceeded(RuntimeError):
    pass


class SpawnFailed(RuntimeError):
    pass


@dataclass
class InstanceHandle:
    tenant: str
    member_id: MemberId
    spawned_at: float
    state: InstanceState = InstanceState.RUNNING


class ClusterSpawner:
    """Joins and removes in-process worker members of a tenant cluster."""

    def __init__(self, cluster):
        self.cluster = cluster

    def spawn(self, label):
        return self.cluster.join(label=label).id

    def shutdown(self, member_id):
        self.cluster.remove(member_id)

    def member_count(self):
        return len(self.cluster.member_ids)


class Node:
    """A machine that can host worker instances for one tenant.

    Adaptive scaling keeps at most one worker per node (``budget=1``); auto
    mode runs every extra worker on the master's own node with a larger
    budget.
    """

    def __init__(self, name, tenant, spawner, clock, budget=1):
        self.name = name
        self.tenant = tenant
        self.spawner = spawner
        self.clock = clock
        self.budget = budget
        self.instances = []
        self._seq = itertools.count()

    @property
    def running(self):
        return [h for h in self.instances if h.state == InstanceState.RUNNING]

    @property
    def instance_count(self):
        return len(self.running)

    def spawn(self) -> InstanceHandle:
        if self.instance_count >= self.budget:
            raise BudgetExceeded(f"node {self.name} already runs {self.instance_count} instance(s)")
        try:
            member_id = self.spawner.spawn(f"{self.name}/I{next(self._seq)}")
        except Exception as exc:
            raise SpawnFailed(str(exc)) from exc
        handle = InstanceHandle(self.tenant, member_id, self.clock.now())
        self.instances.append(handle)
        log.info("node %s spawned %s for %s", self.name, member_id, self.tenant)
        return handle

    def shutdown(self, handle=None):
        """Stop ``handle`` (default: the newest running one); stopping twice is a no-op."""
        if handle is None:
            running = self.running
            if not running:
                return None
            handle = running[-1]
        if handle.state != InstanceState.RUNNING:
            return handle
        handle.state = InstanceState.SHUTTING_DOWN
        try:
            self.spawner.shutdown(handle.member_id)
        finally:
            handle.state = InstanceState.STOPPED
        return handle

    def fingerprint(self):
        return (self.name, tuple(h.state.value for h in self.instances))
