import io
import threading
from dataclasses import dataclass

EVENT_LOG_HEADER = "timestamp,tenant,action,actor_member,member_count_after"

SPAWN = "spawn"
SHUTDOWN = "shutdown"
TERMINATE = "terminate"
CLEAR = "clear"
SCALING_ACTIONS = (SPAWN, SHUTDOWN)


@dataclass(frozen=True)
class ScalingEvent:
    timestamp: float
    tenant: str
    action: str
    actor_member: str
    member_count_after: int

    def csv_row(self):
        return f"{self.timestamp:.6f},{self.tenant},{self.action},{self.actor_member},{self.member_count_after}"


class ScalingEventLog:
    def __init__(self):
        self._events = []
        self._lock = threading.Lock()

    def record(self, timestamp, tenant, action, actor_member, member_count_after):
        ev = ScalingEvent(float(timestamp), tenant, action, str(actor_member), member_count_after)
        with self._lock:
            self._events.append(ev)
        return ev

    @property
    def events(self):
        with self._lock:
            return list(self._events)

    def __len__(self):
        return len(self.events)

    def count(self, action, tenant=None):
        return sum(1 for e in self.events if e.action == action and (tenant is None or e.tenant == tenant))

    def actions(self, tenant=None):
        return [e for e in self.events if e.action in SCALING_ACTIONS and (tenant is None or e.tenant == tenant)]

    def min_gap(self, tenant=None):
        """Smallest interval between consecutive scaling actions of one tenant."""
        gaps = []
        tenants = {e.tenant for e in self.events} if tenant is None else {tenant}
        for t in tenants:
            stamps = sorted(e.timestamp for e in self.actions(t))
            gaps.extend(b - a for a, b in zip(stamps, stamps[1:]))
        return min(gaps, default=float("inf"))

    def to_csv(self):
        out = io.StringIO(newline="")
        out.write(EVENT_LOG_HEADER + "\n")
        for e in self.events:
            out.write(e.csv_row() + "\n")
        return out.getvalue()

    def fingerprint(self):
        return tuple((e.action, e.actor_member) for e in self.events)
