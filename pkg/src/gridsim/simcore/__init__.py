"""Discrete-event cloud simulator with grid-distributed entity work."""

from .entities import (
    SPACE_SHARED,
    TIME_SHARED,
    Cloudlet,
    CloudletStatus,
    Datacenter,
    EntityProfile,
    Host,
    Pe,
    PeStatus,
    Vm,
)
from .events import EventQueue, SimEvent
from .report import CSV_HEADER, CloudletRecord, SimulationReport
from .scheduling import (
    SchedulingError,
    assign_by_signature,
    candidate_signature,
    first_fit,
    schedule_matchmaking,
    schedule_round_robin,
)
from .simulation import (
    MATCHMAKING,
    ROUND_ROBIN,
    DataLossError,
    SimulationConfig,
    SimulationContext,
    allocate_vms_to_hosts,
    create_and_submit_entities,
    create_datacenters,
    init_simulation,
    run_simulation,
    start_simulation,
)
from .tasks import ConsistencyError
from .workload import WorkloadCounter, kernel, kernel_python, run_cloudlet_workload
