"""Health snapshots, scaling policy and the sources that produce snapshots."""

import logging
import os
from dataclasses import dataclass, replace

log = logging.getLogger(__name__)

METRICS = ("processCpuLoad", "systemCpuLoad", "loadAverage", "memoryUsedFraction")
AUTO = "auto"
ADAPTIVE = "adaptive"
MODES = (AUTO, ADAPTIVE)


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class HealthSnapshot:
    processCpuLoad: float = 0.0
    systemCpuLoad: float = 0.0
    loadAverage: float = 0.0
    memoryUsedFraction: float = 0.0
    sampledAt: float = 0.0

    def __post_init__(self):
        for name in ("processCpuLoad", "systemCpuLoad", "memoryUsedFraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.loadAverage < 0:
            raise ValueError("loadAverage must be non-negative")

    def metric(self, name):
        if name not in METRICS:
            raise ValueError(f"unknown metric {name!r}")
        return getattr(self, name)


@dataclass(frozen=True)
class ScalingPolicy:
    metric: str = "processCpuLoad"
    max_threshold: float = 0.15
    min_threshold: float = 0.02
    max_instances: int = 3
    time_between_health_checks: float = 10.0
    time_between_scaling_decisions: float = 60.0
    mode: str = ADAPTIVE

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        if not self.min_threshold < self.max_threshold:
            raise ValueError("minThreshold must be below maxThreshold")
        if self.max_instances < 1:
            raise ValueError("maxNumberOfInstancesToBeSpawned must be positive")
        if self.time_between_health_checks <= 0 or self.time_between_scaling_decisions <= 0:
            raise ValueError("scaling intervals must be positive")
        if self.mode not in MODES:
            raise ValueError(f"scalingMode must be one of {MODES}")


class _MonotoneStamp:
    def __init__(self):
        self.last = float("-inf")

    def __call__(self, t):
        self.last = max(self.last, t)
        return self.last


class SyntheticHealthSource:
    """Replays scripted snapshots in order; ``sample`` returns None once exhausted."""

    def __init__(self, snapshots):
        self._items = [s if isinstance(s, HealthSnapshot) else HealthSnapshot(processCpuLoad=float(s))
                       for s in snapshots]
        self._pos = 0
        self._stamp = _MonotoneStamp()

    def __len__(self):
        return len(self._items)

    @property
    def exhausted(self):
        return self._pos >= len(self._items)

    def sample(self, now=0.0):
        if self.exhausted:
            return None
        snap = self._items[self._pos]
        self._pos += 1
        return replace(snap, sampledAt=self._stamp(now))


class ZeroHealthSource:
    def __init__(self):
        self._stamp = _MonotoneStamp()

    def sample(self, now=0.0):
        return HealthSnapshot(sampledAt=self._stamp(now))


class OsHealthSource:
    """Reads this process's CPU share and the machine's load through psutil."""

    def __init__(self):
        import psutil
        self._psutil = psutil
        self._proc = psutil.Process()
        self._cpus = psutil.cpu_count() or 1
        self._proc.cpu_percent(None)
        psutil.cpu_percent(None)
        self._stamp = _MonotoneStamp()

    def sample(self, now=0.0):
        ps = self._psutil
        proc_load = min(1.0, self._proc.cpu_percent(None) / (100.0 * self._cpus))
        sys_load = min(1.0, ps.cpu_percent(None) / 100.0)
        try:
            load_avg = os.getloadavg()[0]
        except (AttributeError, OSError):
            load_avg = 0.0
        mem = ps.virtual_memory()
        used = min(1.0, self._proc.memory_info().rss / mem.total) if mem.total else 0.0
        return HealthSnapshot(proc_load, sys_load, load_avg, used, self._stamp(now))


def os_health_source():
    """The OS probe, or an all-zero source with a warning where it is unsupported."""
    try:
        return OsHealthSource()
    except Exception as exc:  # psutil missing or the platform refuses the probe
        log.warning("OS health probe unavailable (%s); using an all-zero source", exc)
        return ZeroHealthSource()


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_trace(path):
    """Parse a health trace file into snapshots.

    A trace is either one number per line (the process CPU load) or a CSV
    whose header names snapshot fields.  Blank lines and ``#`` comments are
    skipped.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh]
    except OSError as exc:
        raise TraceError(f"cannot read trace {path}: {exc}") from exc
    rows = [(i, ln) for i, ln in enumerate(lines, 1) if ln and not ln.startswith("#")]
    if not rows:
        return []
    header = None
    first = rows[0][1]
    if not _is_number(first.split(",")[0]):
        header = [h.strip() for h in first.split(",")]
        unknown = set(header) - set(METRICS)
        if unknown:
            raise TraceError(f"unknown trace columns {sorted(unknown)}")
        rows = rows[1:]
    snaps = []
    for lineno, text in rows:
        parts = [p.strip() for p in text.split(",")]
        try:
            values = [float(p) for p in parts]
            if header is None:
                if len(values) != 1:
                    raise ValueError("expected one value per line")
                snaps.append(HealthSnapshot(processCpuLoad=values[0]))
            else:
                if len(values) != len(header):
                    raise ValueError(f"expected {len(header)} columns")
                snaps.append(HealthSnapshot(**dict(zip(header, values))))
        except ValueError as exc:
            raise TraceError(f"{path}:{lineno}: {exc}") from exc
    return snaps

