"""Simulation lifecycle: init, distributed entity work, master-only core loop.

Entity creation, candidate search, round-robin binding and cloudlet
workloads run as grid tasks, one contiguous id range per member.  VM
placement, the final matchmaking assignment and the event-driven core run
on the driver, which also assembles the report and clears the grid.
"""

import logging
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from ..datagrid import (
    ConfigurationError,
    DataUnavailableError,
    MemberLeftError,
    TaskEnvelope,
    ToMember,
    gather,
    get_cluster,
)
from ..partition import deployment_offsets, partition_range
from . import tasks as simtasks
from .entities import SPACE_SHARED, Datacenter, EntityProfile
from .events import EventQueue
from .report import CloudletRecord, SimulationReport
from .scheduling import (
    DEFAULT_FAIRNESS_FACTOR,
    DEFAULT_REFERENCE_SECONDS,
    SchedulingError,
    assign_by_signature,
    first_fit,
)
from .workload import DEFAULT_ITERATIONS_PER_MI

log = logging.getLogger(__name__)

ROUND_ROBIN = "roundRobin"
MATCHMAKING = "matchmaking"
SCHEDULERS = (ROUND_ROBIN, MATCHMAKING)

_SUBMIT = "submit"
_FINISH_CHECK = "finishCheck"


class DataLossError(RuntimeError):
    """Grid data needed by the simulation was lost with a departed member."""


@dataclass
class SimulationConfig:
    num_users: int
    num_datacenters: int = 15
    hosts_per_datacenter: int = 20
    num_vms: int = 200
    num_cloudlets: int = 400
    with_workload: bool = False
    scheduler: str = ROUND_ROBIN
    fairness_factor: float = DEFAULT_FAIRNESS_FACTOR
    reference_seconds: float = DEFAULT_REFERENCE_SECONDS
    iterations_per_mi: float = DEFAULT_ITERATIONS_PER_MI
    seed: int = 0
    profile: EntityProfile = field(default_factory=EntityProfile)
    trace: bool = False

    def validate(self):
        if self.num_users < 1:
            raise ConfigurationError("at least one cloud user is required")
        if self.num_datacenters < 1:
            raise ConfigurationError("at least one datacenter is required")
        if self.hosts_per_datacenter < 1:
            raise ConfigurationError("each datacenter needs at least one host")
        if self.num_vms < 1 or self.num_cloudlets < 1:
            raise ConfigurationError("noOfVms and noOfCloudlets must be positive")
        if self.scheduler not in SCHEDULERS:
            raise ConfigurationError(f"scheduler must be one of {SCHEDULERS}")
        if self.fairness_factor < 1:
            raise ConfigurationError("fairnessFactor must be >= 1")
        if self.reference_seconds <= 0:
            raise ConfigurationError("referenceSeconds must be positive")
        if self.iterations_per_mi < 0:
            raise ConfigurationError("workload iterations per MI must be non-negative")
        return self


@dataclass
class SimulationContext:
    num_users: int
    cluster: object
    trace: bool = False
    clock: float = 0.0
    queue: EventQueue = field(default_factory=EventQueue)
    datacenters: list = field(default_factory=list)
    placement: object = None
    vms: dict = field(default_factory=dict)
    dequeued: int = 0

    @property
    def group(self):
        return self.cluster.name

    def map(self, name):
        return self.cluster.get_map(name)


def init_simulation(num_users, cluster_group="main", trace_flag=False, cluster=None):
    if num_users < 1:
        raise ConfigurationError("at least one cloud user is required")
    if cluster is None:
        cluster = get_cluster(cluster_group)
    elif cluster.name != cluster_group:
        raise ConfigurationError(f"cluster {cluster.name!r} is not group {cluster_group!r}")
    for name in simtasks.SIM_MAPS:
        cluster.map_clear(name)
    return SimulationContext(num_users, cluster, trace=trace_flag)


def _make_datacenter(dc_id, hosts_per_dc, profile):
    hosts = [profile.make_host(dc_id * hosts_per_dc + h) for h in range(hosts_per_dc)]
    return Datacenter(dc_id, hosts)


def create_datacenters(count, hosts_per_dc, ctx, profile=None, concurrent=True):
    if count < 1:
        raise ConfigurationError("at least one datacenter is required")
    if hosts_per_dc < 1:
        raise ConfigurationError("each datacenter needs at least one host")
    profile = profile or EntityProfile()
    ids = range(count)
    if concurrent:
        with ThreadPoolExecutor(max_workers=min(count, 8), thread_name_prefix="dc") as pool:
            dcs = list(pool.map(lambda i: _make_datacenter(i, hosts_per_dc, profile), ids))
    else:
        dcs = [_make_datacenter(i, hosts_per_dc, profile) for i in ids]
    ctx.datacenters = dcs
    return dcs


class _LocalTaskContext:
    def __init__(self, cluster):
        self.member = None
        self.grid = cluster

    @property
    def member_id(self):
        return None


def create_and_submit_entities(ctx, no_of_vms, no_of_cloudlets, member_offset, parallel_count,
                               with_workload=False, profile=None):
    """Create this member's VM and cloudlet ranges in the grid; returns local counts."""
    vr = partition_range(no_of_vms, member_offset, parallel_count)
    cr = partition_range(no_of_cloudlets, member_offset, parallel_count)
    profile = profile or EntityProfile()
    made = simtasks.create_range(_LocalTaskContext(ctx.cluster), [vr.init, vr.final], [cr.init, cr.final],
                                 ctx.num_users, profile.to_dict(), with_workload)
    return tuple(made)


def _grid_read(fn, *args):
    try:
        return fn(*args)
    except DataUnavailableError as exc:
        raise DataLossError(str(exc)) from exc


def allocate_vms_to_hosts(ctx):
    """First-fit placement of every VM in the grid onto the context's hosts."""
    if not ctx.datacenters:
        raise ConfigurationError("there should be at least one datacenter")
    vms = sorted((v for _, v in _grid_read(ctx.map(simtasks.VMS).items)), key=lambda v: v.id)
    hosts = [h for dc in ctx.datacenters for h in dc.host_list]
    ctx.placement = first_fit(vms, hosts)
    ctx.vms = {v.id: v for v in vms if v.id in ctx.placement.host_of}
    return ctx.placement.host_of


def _run_phase(ctx, stage, task_name, ranges_for, hook=None, **common):
    """Ship one task per member with its id range; re-run lost ranges on the master."""
    cluster = ctx.cluster
    offsets = deployment_offsets(cluster.member_ids)
    parallel = len(offsets)
    if parallel == 0:
        raise DataLossError(f"cluster {cluster.name!r} has no members")
    jobs = []
    for member_id, offset in offsets.items():
        ranges = ranges_for(offset, parallel)
        env = TaskEnvelope.of(task_name, ToMember(member_id), **ranges, **common)
        jobs.append((ranges, cluster.submit(env)[0]))
    if hook is not None:
        hook(stage, ctx)
    results = []
    pending = [(ranges, res) for (ranges, _), res in zip(jobs, gather([j for _, j in jobs]))]
    while pending:
        ranges, res = pending.pop(0)
        if res.ok:
            results.append(res.value)
            continue
        if isinstance(res.error, DataUnavailableError) or cluster.data_lost:
            raise DataLossError(str(res.error)) from res.error
        if not isinstance(res.error, MemberLeftError):
            raise res.error
        master = cluster.master
        if master is None:
            raise DataLossError("every member left")
        log.warning("%s: member %s left, re-running its range on %s", stage, res.member, master.id)
        env = TaskEnvelope.of(task_name, ToMember(master.id), resume=True, **ranges, **common)
        pending.append((ranges, gather(cluster.submit(env))[0]))
    if cluster.data_lost:
        raise DataLossError(f"cluster {cluster.name!r} lost partitions during {stage}")
    return results


def _ranges(total, *names):
    def ranges_for(offset, parallel):
        r = partition_range(total, offset, parallel)
        return {name: [r.init, r.final] for name in names}
    return ranges_for


def distribute_entities(ctx, config, hook=None):
    def ranges_for(offset, parallel):
        vr = partition_range(config.num_vms, offset, parallel)
        cr = partition_range(config.num_cloudlets, offset, parallel)
        return {"vm_range": [vr.init, vr.final], "cloudlet_range": [cr.init, cr.final]}
    counts = _run_phase(ctx, "create", "simcore.create", ranges_for, hook,
                        num_users=ctx.num_users, profile=config.profile.to_dict(),
                        with_workload=config.with_workload)
    return counts


def schedule(ctx, config, hook=None):
    """Bind every cloudlet in the grid; returns the unbound cloudlet ids."""
    vm_ids = sorted(ctx.vms)
    if not vm_ids:
        raise SchedulingError("no VMs to schedule onto")
    ranges = _ranges(config.num_cloudlets, "cloudlet_range")
    if config.scheduler == ROUND_ROBIN:
        _run_phase(ctx, "schedule", "simcore.round_robin", ranges, hook, vm_ids=vm_ids)
        return []
    vms = [ctx.vms[i] for i in vm_ids]
    _run_phase(ctx, "schedule", "simcore.match", ranges, hook, vms=vms,
               fairness_factor=config.fairness_factor, reference_seconds=config.reference_seconds)
    sig_map = dict(_grid_read(ctx.map(simtasks.SIGNATURES).items))
    signatures = [(cid, tuple(sig_map[cid]) or None) for cid in sorted(sig_map)]
    assignment, unbound = assign_by_signature(signatures)
    cloudlets = ctx.map(simtasks.CLOUDLETS)
    for cid, vm_id in assignment.items():
        _grid_read(cloudlets.put, cid, _grid_read(cloudlets.get, cid).bind(vm_id))
    if unbound:
        log.info("%d cloudlets have no feasible VM", len(unbound))
    return unbound


def run_workloads(ctx, config, hook=None):
    if not config.with_workload:
        return 0
    ranges = _ranges(config.num_cloudlets, "cloudlet_range")
    return sum(_run_phase(ctx, "workload", "simcore.workload", ranges, hook,
                          iterations_per_mi=config.iterations_per_mi, seed=config.seed))


class _VmRun:
    """Progress of the cloudlets resident on one VM."""

    def __init__(self, vm):
        self.vm = vm
        self.space_shared = vm.scheduler_kind == SPACE_SHARED
        self.remaining = {}
        self.waiting = deque()
        self.last = 0.0
        self.version = 0

    def share(self):
        n = len(self.remaining)
        if self.space_shared:
            return self.vm.mips
        return self.vm.mips * min(1.0, self.vm.number_of_pes / n)

    def advance(self, now):
        if self.remaining:
            done = self.share() * (now - self.last)
            for cid in self.remaining:
                self.remaining[cid] -= done
        self.last = now


def _core_loop(ctx, cloudlets):
    """Drain the event queue; returns ``{cloudlet_id: (start, finish)}``."""
    runs = {vm_id: _VmRun(vm) for vm_id, vm in ctx.vms.items()}
    start, finish = {}, {}
    queue = ctx.queue
    for c in sorted(cloudlets, key=lambda c: c.id):
        queue.push(0.0, c.bound_vm_id, _SUBMIT, c)
    lengths = {c.id: c.length_mi for c in cloudlets}

    def admit(run, cid, now):
        run.remaining[cid] = lengths[cid]
        start[cid] = now

    def reschedule(run, now):
        run.version += 1
        if run.remaining:
            eta = min(run.remaining.values()) / run.share()
            queue.push(now + max(eta, 0.0), run.vm.id, _FINISH_CHECK, run.version)

    last_time = 0.0
    while queue:
        ev = queue.pop()
        if ev.time < last_time:
            raise AssertionError("event queue went backwards")
        last_time = ctx.clock = ev.time
        ctx.dequeued += 1
        run = runs[ev.target]
        if ev.tag == _SUBMIT:
            run.advance(ev.time)
            if run.space_shared and len(run.remaining) >= run.vm.number_of_pes:
                run.waiting.append(ev.payload.id)
            else:
                admit(run, ev.payload.id, ev.time)
            reschedule(run, ev.time)
            continue
        if ev.payload != run.version:
            continue
        run.advance(ev.time)
        floor = min(run.remaining.values())
        tol = 1e-9 * max(lengths[c] for c in run.remaining)
        for cid in sorted(c for c, left in run.remaining.items() if left <= floor + tol):
            del run.remaining[cid]
            finish[cid] = ev.time
        while run.waiting and len(run.remaining) < run.vm.number_of_pes:
            admit(run, run.waiting.popleft(), ev.time)
        reschedule(run, ev.time)
    return {cid: (start[cid], finish[cid]) for cid in finish}


def start_simulation(ctx, config=None, unbound=()):
    """Run the core event loop on the bound cloudlets and assemble the report."""
    cloudlets = [c for _, c in _grid_read(ctx.map(simtasks.CLOUDLETS).items)]
    checksums = dict(_grid_read(ctx.map(simtasks.CHECKSUMS).items))
    bound = [c for c in cloudlets if c.bound_vm_id is not None]
    times = _core_loop(ctx, bound)
    records = [CloudletRecord(c.id, c.bound_vm_id, *times[c.id], checksums.get(c.id)) for c in bound]
    placement = ctx.placement
    report = SimulationReport(
        records,
        member_count=len(ctx.cluster.member_ids),
        scheduler=config.scheduler if config else "",
        unbound=sorted(set(unbound) | {c.id for c in cloudlets if c.bound_vm_id is None}),
        unplaceable_vms=list(placement.unplaceable) if placement else [],
        num_vms=config.num_vms if config else len(ctx.vms),
        num_cloudlets=config.num_cloudlets if config else len(cloudlets),
    )
    clear_distributed_objects(ctx)
    return report


def clear_distributed_objects(ctx):
    for name in simtasks.SIM_MAPS:
        ctx.cluster.map_clear(name)
    ctx.queue.clear()


def run_simulation(cluster, config: SimulationConfig, hook=None) -> SimulationReport:
    """Full pipeline on ``cluster``.  ``hook(stage, ctx)`` fires after each phase is shipped."""
    config.validate()
    began = time.perf_counter()
    ctx = init_simulation(config.num_users, cluster.name, config.trace, cluster=cluster)
    try:
        create_datacenters(config.num_datacenters, config.hosts_per_datacenter, ctx, config.profile)
        distribute_entities(ctx, config, hook)
        allocate_vms_to_hosts(ctx)
        unbound = schedule(ctx, config, hook)
        run_workloads(ctx, config, hook)
        report = start_simulation(ctx, config, unbound)
    except BaseException:
        try:
            clear_distributed_objects(ctx)
        except Exception:
            log.exception("clearing grid objects after a failed run")
        raise
    report.wall_clock = time.perf_counter() - began
    if hook is not None:
        hook("done", ctx)
    return report
