"""Grid tasks for the distributable phases of a cloud simulation.

Each task works on one contiguous id range and talks to the rest of the
simulation only through grid maps, so it runs the same on an in-process
member and in a separate member process.  ``resume=True`` marks a re-run of
a range whose first owner left midway: entries it already published are
accepted when they equal what the re-run computes.
"""

from ..datagrid import MemberLeftError, task
from .entities import EntityProfile
from .scheduling import candidate_signature
from .workload import run_cloudlet_workload

VMS = "sim.vms"
CLOUDLETS = "sim.cloudlets"
SIGNATURES = "sim.signatures"
CHECKSUMS = "sim.checksums"
SIM_MAPS = (VMS, CLOUDLETS, SIGNATURES, CHECKSUMS)


class ConsistencyError(RuntimeError):
    """An entity id was published twice with different contents."""


def _still_member(ctx):
    if not getattr(ctx.member, "alive", True):
        raise MemberLeftError(str(ctx.member_id))


def publish_unique(grid_map, key, value, resume=False):
    existing = grid_map.put_if_absent(key, value)
    if existing is None:
        return True
    if resume and existing == value:
        return False
    raise ConsistencyError(f"duplicate id {key!r} in map {grid_map.name!r}")


@task("simcore.create")
def create_range(ctx, vm_range, cloudlet_range, num_users, profile, with_workload=False, resume=False):
    profile = EntityProfile.from_dict(profile)
    vms = ctx.grid.get_map(VMS)
    cloudlets = ctx.grid.get_map(CLOUDLETS)
    made_vms = made_cloudlets = 0
    for vm_id in range(*vm_range):
        _still_member(ctx)
        made_vms += publish_unique(vms, vm_id, profile.make_vm(vm_id, num_users), resume)
    for cid in range(*cloudlet_range):
        _still_member(ctx)
        cloudlet = profile.make_cloudlet(cid, num_users, with_workload)
        made_cloudlets += publish_unique(cloudlets, cid, cloudlet, resume)
    return [made_vms, made_cloudlets]


@task("simcore.round_robin")
def bind_round_robin(ctx, cloudlet_range, vm_ids, resume=False):
    """Bind cloudlet ``i`` to ``vm_ids[i % len(vm_ids)]``.

    Cloudlet ids are dense from 0, so an id is also its ordered position and
    no member needs to see anyone else's cloudlets.
    """
    cloudlets = ctx.grid.get_map(CLOUDLETS)
    for cid in range(*cloudlet_range):
        _still_member(ctx)
        cloudlet = cloudlets.get(cid)
        cloudlets.put(cid, cloudlet.bind(vm_ids[cid % len(vm_ids)]))
    return cloudlet_range[1] - cloudlet_range[0]


@task("simcore.match")
def match_candidates(ctx, cloudlet_range, vms, fairness_factor, reference_seconds, resume=False):
    cloudlets = ctx.grid.get_map(CLOUDLETS)
    signatures = ctx.grid.get_map(SIGNATURES)
    for cid in range(*cloudlet_range):
        _still_member(ctx)
        sig = candidate_signature(cloudlets.get(cid), vms, fairness_factor, reference_seconds)
        # an empty tuple marks "no feasible VM"; None would read as absent
        signatures.put(cid, sig or ())
    return cloudlet_range[1] - cloudlet_range[0]


@task("simcore.workload")
def run_workloads(ctx, cloudlet_range, iterations_per_mi, seed=0, resume=False):
    cloudlets = ctx.grid.get_map(CLOUDLETS)
    checksums = ctx.grid.get_map(CHECKSUMS)
    ran = 0
    for cid in range(*cloudlet_range):
        _still_member(ctx)
        checksum = run_cloudlet_workload(cloudlets.get(cid), iterations_per_mi, seed)
        if checksum is not None:
            checksums.put(cid, checksum)
            ran += 1
    return ran
