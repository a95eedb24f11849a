"""Cloud entity model: PEs, hosts, datacenters, VMs and cloudlets.

Every attribute of a VM or cloudlet is a pure function of its id (see
:class:`EntityProfile`), so any member can create any slice of the entity
space and the result does not depend on how many members took part.
"""

import enum
from dataclasses import asdict, dataclass, field, replace

from ..datagrid import codec


class PeStatus(enum.IntEnum):
    FREE = 1
    BUSY = 2
    FAILED = 3


class CloudletStatus(str, enum.Enum):
    CREATED = "created"
    SUBMITTED = "submitted"
    RUNNING = "running"
    FINISHED = "finished"


TIME_SHARED = "timeShared"
SPACE_SHARED = "spaceShared"


@dataclass
class Pe:
    id: int
    mips: float
    status: PeStatus = PeStatus.FREE


@dataclass
class Host:
    id: int
    pe_list: list
    ram_mb: int
    bw_mbps: int
    storage_mb: int
    vm_ids: set = field(default_factory=set)
    ram_used: int = 0

    def __post_init__(self):
        if len({pe.mips for pe in self.pe_list}) > 1:
            raise ValueError("all PEs of a host must share the same MIPS rating")

    @property
    def pe_mips(self):
        return self.pe_list[0].mips if self.pe_list else 0.0

    def free_pes(self):
        return [pe for pe in self.pe_list if pe.status == PeStatus.FREE]

    def can_host(self, vm):
        return (self.ram_used + vm.ram_mb <= self.ram_mb
                and len(self.free_pes()) >= vm.number_of_pes
                and vm.mips <= self.pe_mips)

    def place(self, vm):
        for pe in self.free_pes()[:vm.number_of_pes]:
            pe.status = PeStatus.BUSY
        self.ram_used += vm.ram_mb
        self.vm_ids.add(vm.id)

    def layout(self):
        return (self.id, len(self.pe_list), self.pe_mips, self.ram_mb, self.bw_mbps, self.storage_mb)


@dataclass
class Datacenter:
    id: int
    host_list: list
    cost_per_sec: float = 3.0

    def layout(self):
        return (self.id, self.cost_per_sec, tuple(h.layout() for h in self.host_list))


@codec.register_record(name="vm")
@dataclass(frozen=True)
class Vm:
    id: int
    user_id: int
    mips: float
    number_of_pes: int
    ram_mb: int
    bw_mbps: int
    size_mb: int
    vmm_name: str = "Xen"
    scheduler_kind: str = TIME_SHARED


@codec.register_record(name="cloudlet")
@dataclass(frozen=True)
class Cloudlet:
    id: int
    user_id: int
    length_mi: float
    pes_required: int = 1
    bound_vm_id: int = None
    with_workload: bool = False
    status: str = CloudletStatus.CREATED.value

    def __post_init__(self):
        if self.length_mi <= 0:
            raise ValueError("cloudlet length must be positive")
        if self.status == CloudletStatus.FINISHED.value and self.bound_vm_id is None:
            raise ValueError("a finished cloudlet must be bound to a VM")

    def bind(self, vm_id):
        return replace(self, bound_vm_id=vm_id, status=CloudletStatus.SUBMITTED.value)


@dataclass(frozen=True)
class EntityProfile:
    """Id -> attribute rules for generated entities, plus the host template."""

    vm_mips_levels: tuple = (500.0, 1000.0, 2000.0, 4000.0)
    vm_pes: int = 1
    vm_ram_mb: int = 512
    vm_bw_mbps: int = 1000
    vm_size_mb: int = 10000
    vm_scheduler: str = TIME_SHARED
    cloudlet_base_mi: float = 1000.0
    cloudlet_length_steps: int = 8
    host_pes: int = 4
    host_pe_mips: float = 4000.0
    host_ram_mb: int = 4096
    host_bw_mbps: int = 10000
    host_storage_mb: int = 1000000

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data["vm_mips_levels"] = tuple(data["vm_mips_levels"])
        return cls(**data)

    def make_vm(self, vm_id, num_users):
        return Vm(
            id=vm_id,
            user_id=vm_id % num_users,
            mips=self.vm_mips_levels[vm_id % len(self.vm_mips_levels)],
            number_of_pes=self.vm_pes,
            ram_mb=self.vm_ram_mb,
            bw_mbps=self.vm_bw_mbps,
            size_mb=self.vm_size_mb,
            scheduler_kind=self.vm_scheduler,
        )

    def make_cloudlet(self, cloudlet_id, num_users, with_workload=False):
        step = (cloudlet_id * 7) % self.cloudlet_length_steps
        return Cloudlet(
            id=cloudlet_id,
            user_id=cloudlet_id % num_users,
            length_mi=self.cloudlet_base_mi * (1 + step),
            with_workload=with_workload,
        )

    def make_host(self, host_id):
        pes = [Pe(i, self.host_pe_mips) for i in range(self.host_pes)]
        return Host(host_id, pes, self.host_ram_mb, self.host_bw_mbps, self.host_storage_mb)
