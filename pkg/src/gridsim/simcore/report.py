import io
from dataclasses import dataclass, field

CSV_HEADER = "cloudlet_id,vm_id,start_time,finish_time,checksum"


@dataclass(frozen=True)
class CloudletRecord:
    cloudlet_id: int
    vm_id: int
    start_time: float
    finish_time: float
    checksum: int = None

    def __post_init__(self):
        if self.finish_time < self.start_time:
            raise ValueError(f"cloudlet {self.cloudlet_id} finishes before it starts")

    def csv_row(self):
        checksum = "" if self.checksum is None else str(self.checksum)
        return f"{self.cloudlet_id},{self.vm_id},{self.start_time:.6f},{self.finish_time:.6f},{checksum}"


@dataclass
class SimulationReport:
    records: list
    wall_clock: float = 0.0
    member_count: int = 1
    scheduler: str = ""
    unbound: list = field(default_factory=list)
    unplaceable_vms: list = field(default_factory=list)
    num_vms: int = 0
    num_cloudlets: int = 0

    def __post_init__(self):
        self.records = sorted(self.records, key=lambda r: r.cloudlet_id)

    def to_csv(self) -> str:
        out = io.StringIO(newline="")
        out.write(CSV_HEADER + "\n")
        for rec in self.records:
            out.write(rec.csv_row() + "\n")
        return out.getvalue()

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv())

    def summary_line(self):
        """``members,wall_clock_s,scheduler,cloudlets,vms``"""
        return f"{self.member_count},{self.wall_clock:.6f},{self.scheduler},{self.num_cloudlets},{self.num_vms}"

    @property
    def makespan(self):
        return max((r.finish_time for r in self.records), default=0.0)
