"""Elastic scaling control plane: health loop, probe, arbitration, coordinator."""

from .board import TERMINATE_ALL, LocalRequests, ScalingBoard
from .coordinator import Coordinator, Deployment, TenantStatus, build_deployment
from .demo import DemoResult, run_scaling_demo
from .eventlog import EVENT_LOG_HEADER, ScalingEvent, ScalingEventLog
from .health import (
    ADAPTIVE,
    AUTO,
    HealthSnapshot,
    OsHealthSource,
    ScalingPolicy,
    SyntheticHealthSource,
    TraceError,
    ZeroHealthSource,
    load_trace,
    os_health_source,
)
from .instances import BudgetExceeded, ClusterSpawner, InstanceHandle, InstanceState, Node, SpawnFailed
from .loops import auto_scaler_loop, dynamic_scaling_loop, ias_loop, probe_loop, terminate_loop
from .runtime import (
    FifoChooser,
    RandomChooser,
    RealTimeRunner,
    ScriptedChooser,
    StopSignal,
    VirtualClock,
    VirtualScheduler,
    Wait,
    explore,
)
