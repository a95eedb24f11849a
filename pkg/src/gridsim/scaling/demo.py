"""Drive the full scaling control plane against a health trace on a virtual clock."""

from dataclasses import dataclass

from ..datagrid import Cluster
from .board import LocalRequests, ScalingBoard
from .eventlog import SPAWN, ScalingEventLog
from .health import AUTO, SyntheticHealthSource
from .instances import ClusterSpawner, Node
from .loops import auto_scaler_loop, dynamic_scaling_loop, ias_loop, probe_loop, terminate_loop
from .runtime import FifoChooser, StopSignal, VirtualScheduler, Wait


@dataclass
class DemoResult:
    event_log: ScalingEventLog
    workers: int
    max_workers: int
    members: int
    board: tuple
    finished_at: float
    steps: int

    @property
    def spawn_events(self):
        return self.event_log.count(SPAWN)


def run_scaling_demo(policy, trace, tenant="main", nodes=None, terminate=False,
                     chooser=None, backup_count=1):
    """Run the health loop, probe and arbitration loops until the trace ends.

    ``nodes`` is the number of idle nodes running an arbitration loop
    (default: one more than the spawn budget, so the budget is what stops
    scaling).  In auto mode workers are spawned on the master's own node
    instead.  With ``terminate`` the master tears the tenant down at the end.
    """
    source = trace if hasattr(trace, "sample") else SyntheticHealthSource(trace)
    sched = VirtualScheduler(chooser or FifoChooser())
    clock = sched.clock
    stop = StopSignal()
    sim = Cluster(tenant, backup_count=backup_count)
    sim.join(label="master/S")
    coord = Cluster(f"{tenant}-coordination")
    coord.join(label="master/C")
    board = ScalingBoard(coord, tenant)
    board.init_health_map()
    requests = LocalRequests()
    events = ScalingEventLog()
    spawner = ClusterSpawner(sim)

    workers = lambda: len(sim.member_ids) - 1  # noqa: E731
    health = sched.spawn("health", dynamic_scaling_loop(policy, source, requests, workers, clock, stop))
    if policy.mode == AUTO:
        master_node = Node("master", tenant, spawner, clock, budget=policy.max_instances)
        sched.spawn("auto", auto_scaler_loop(requests, master_node, policy, clock, events, stop))
    else:
        sched.spawn("probe", probe_loop(board, requests, policy, stop))
        count = policy.max_instances + 1 if nodes is None else nodes
        for k in range(1, count + 1):
            node = Node(f"node{k}", tenant, spawner, clock)
            sched.spawn(f"ias{k}", ias_loop(board, node, policy, clock, events, stop))

    def supervisor():
        while not health.done:
            yield Wait(policy.time_between_health_checks)
        # let the last published decision land and its hold period expire
        yield Wait(policy.time_between_scaling_decisions + 2 * policy.time_between_health_checks)
        if terminate and policy.mode != AUTO:
            yield from terminate_loop(board, tenant, policy, clock, events, spawner.member_count)
            yield Wait(2 * policy.time_between_health_checks)
        stop.set()

    sched.spawn("supervisor", supervisor())
    sched.run()
    result = DemoResult(
        event_log=events,
        workers=len(sim.member_ids) - 1,
        max_workers=max((e.member_count_after for e in events.events), default=1) - 1,
        members=len(sim.member_ids),
        board=board.snapshot(),
        finished_at=clock.now(),
        steps=sched.steps,
    )
    sim.shutdown()
    coord.shutdown()
    return result
