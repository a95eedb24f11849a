"""VM placement and cloudlet -> VM scheduling policies.

The matchmaking policy is split in two steps so it can be distributed: the
candidate search (:func:`candidate_signature`) is independent per cloudlet
and runs on whichever member owns the cloudlet, while the fair round-robin
spread over each candidate set (:func:`assign_by_signature`) only needs the
signatures in cloudlet order.
"""

import logging
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

DEFAULT_FAIRNESS_FACTOR = 2.0
DEFAULT_REFERENCE_SECONDS = 2.0


class SchedulingError(ValueError):
    pass


@dataclass
class Placement:
    host_of: dict = field(default_factory=dict)
    unplaceable: list = field(default_factory=list)


def first_fit(vms, hosts) -> Placement:
    """Place VMs in id order on the lowest-id host with room (RAM, PEs, MIPS)."""
    hosts = sorted(hosts, key=lambda h: h.id)
    placement = Placement()
    for vm in sorted(vms, key=lambda v: v.id):
        for host in hosts:
            if host.can_host(vm):
                host.place(vm)
                placement.host_of[vm.id] = host.id
                break
        else:
            log.warning("VM %d (ram %d MB) fits on no host", vm.id, vm.ram_mb)
            placement.unplaceable.append(vm.id)
    return placement


def round_robin_vm(position, vm_ids):
    if not vm_ids:
        raise SchedulingError("no VMs to schedule onto")
    return vm_ids[position % len(vm_ids)]


def schedule_round_robin(cloudlet_ids, vm_ids) -> dict:
    if not vm_ids:
        raise SchedulingError("no VMs to schedule onto")
    if not cloudlet_ids:
        raise SchedulingError("no cloudlets to schedule")
    return {cid: round_robin_vm(i, vm_ids) for i, cid in enumerate(cloudlet_ids)}


def required_mips(cloudlet, reference_seconds=DEFAULT_REFERENCE_SECONDS):
    return cloudlet.length_mi / reference_seconds


def candidate_signature(cloudlet, vms, fairness_factor=DEFAULT_FAIRNESS_FACTOR,
                        reference_seconds=DEFAULT_REFERENCE_SECONDS):
    """Ids of the VMs a cloudlet may bind to, best fit first; None if infeasible.

    Candidates are the VMs that are big enough but not more than
    ``fairness_factor`` times bigger than needed.  When that window is empty
    the cloudlet falls back to the smallest VMs that still fit.
    """
    if fairness_factor < 1:
        raise SchedulingError("fairness factor must be >= 1")
    need = required_mips(cloudlet, reference_seconds)
    fitting = sorted((vm for vm in vms if vm.mips >= need), key=lambda v: (v.mips, v.id))
    if not fitting:
        return None
    window = [vm.id for vm in fitting if vm.mips <= fairness_factor * need]
    if window:
        return tuple(window)
    smallest = fitting[0].mips
    return tuple(vm.id for vm in fitting if vm.mips == smallest)


def assign_by_signature(signatures):
    """Spread cloudlets round-robin within each candidate set.

    ``signatures`` is ``[(cloudlet_id, signature-or-None)]`` in cloudlet
    order.  Returns ``(assignment, unbound_ids)``.
    """
    seen = {}
    assignment = {}
    unbound = []
    for cid, sig in signatures:
        if sig is None:
            unbound.append(cid)
            continue
        k = seen.get(sig, 0)
        assignment[cid] = sig[k % len(sig)]
        seen[sig] = k + 1
    return assignment, unbound


def schedule_matchmaking(cloudlets, vms, fairness_factor=DEFAULT_FAIRNESS_FACTOR,
                         reference_seconds=DEFAULT_REFERENCE_SECONDS):
    if not vms:
        raise SchedulingError("no VMs to schedule onto")
    ordered = sorted(cloudlets, key=lambda c: c.id)
    sigs = [(c.id, candidate_signature(c, vms, fairness_factor, reference_seconds)) for c in ordered]
    assignment, unbound = assign_by_signature(sigs)
    if unbound:
        log.info("%d cloudlets have no feasible VM", len(unbound))
    return assignment, unbound
