"""Properties-file configuration: ``key=value`` lines, ``#`` comments.

Every key has a fixed type and default.  Values may carry one layer of
surrounding double quotes (``mainCluster="main"``).  Extra tenants are given
as ``mainCluster2``, ``mainCluster3`` and so on.
"""

import logging
import re
from dataclasses import dataclass, field

from .datagrid import ConfigurationError

log = logging.getLogger(__name__)


class ConfigParseError(ConfigurationError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno else message)


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


# property key -> (attribute, converter, default)
KEYS = {
    # cloud simulation
    "noOfUsers": ("no_of_users", int, None),
    "noOfDatacenters": ("no_of_datacenters", int, 15),
    "noOfHosts": ("no_of_hosts", int, 20),
    "noOfVms": ("no_of_vms", int, 200),
    "noOfCloudlets": ("no_of_cloudlets", int, 400),
    "simultaneousInstances": ("simultaneous_instances", int, 1),
    "noOfExecutions": ("no_of_executions", int, 2),
    "withWorkload": ("with_workload", _parse_bool, False),
    # mapreduce
    "mapReduceSize": ("map_reduce_size", int, 100000),
    "isVerbose": ("is_verbose", _parse_bool, False),
    "loadFolder": ("load_folder", str, "conf/mapreduce/load"),
    "filesRead": ("files_read", int, 0),
    # health and scaling
    "timeBetweenHealthChecks": ("time_between_health_checks", float, None),
    "highThresholdProcessCpuLoad": ("high_threshold", float, 0.15),
    "lowThresholdProcessCpuLoad": ("low_threshold", float, 0.02),
    "maxNumberOfInstancesToBeSpawned": ("max_instances", int, 3),
    "timeBetweenScalingDecisions": ("time_between_scaling_decisions", float, 60.0),
    "scalingMode": ("scaling_mode", str, "adaptive"),
    "healthMetric": ("health_metric", str, "processCpuLoad"),
    # clusters
    "mainCluster": ("main_cluster", str, "main"),
    "subCluster": ("sub_cluster", str, "sub"),
    "hazelcastXml": ("grid_config_file", str, None),
    "backupCount": ("backup_count", int, 1),
    # scheduling and workload
    "scheduler": ("scheduler", str, "roundRobin"),
    "fairnessFactor": ("fairness_factor", float, 2.0),
    "referenceSeconds": ("reference_seconds", float, 2.0),
    "iterationsPerMi": ("iterations_per_mi", float, 500.0),
    "seed": ("seed", int, 0),
    "benchMembers": ("bench_members", int, 4),
    # cost model
    "modelK": ("model_k", float, None),
    "modelT1": ("model_t1", float, None),
    "modelS": ("model_s", float, 0.0),
    "modelD": ("model_d", float, 0.0),
    "modelW": ("model_w", float, 1.0),
    "modelN": ("model_n", int, None),
    "modelF": ("model_f", float, 0.0),
    "modelSigma": ("model_sigma", float, 0.0),
    "modelC1": ("model_c1", float, 0.0),
    "modelG": ("model_g", float, 0.0),
    "modelTheta1": ("model_theta1", float, 0.0),
    "predictInstances": ("predict_instances", str, "1,2,3,4,5,6,7,8"),
}
ATTR_KEYS = {attr: key for key, (attr, _, _) in KEYS.items()}
_TENANT_KEY = re.compile(r"mainCluster(\d+)")


@dataclass
class Config:
    no_of_users: int = None
    no_of_datacenters: int = 15
    no_of_hosts: int = 20
    no_of_vms: int = 200
    no_of_cloudlets: int = 400
    simultaneous_instances: int = 1
    no_of_executions: int = 2
    with_workload: bool = False
    map_reduce_size: int = 100000
    is_verbose: bool = False
    load_folder: str = "conf/mapreduce/load"
    files_read: int = 0
    time_between_health_checks: float = None
    high_threshold: float = 0.15
    low_threshold: float = 0.02
    max_instances: int = 3
    time_between_scaling_decisions: float = 60.0
    scaling_mode: str = "adaptive"
    health_metric: str = "processCpuLoad"
    main_cluster: str = "main"
    sub_cluster: str = "sub"
    grid_config_file: str = None
    backup_count: int = 1
    scheduler: str = "roundRobin"
    fairness_factor: float = 2.0
    reference_seconds: float = 2.0
    iterations_per_mi: float = 500.0
    seed: int = 0
    bench_members: int = 4
    model_k: float = None
    model_t1: float = None
    model_s: float = 0.0
    model_d: float = 0.0
    model_w: float = 1.0
    model_n: int = None
    model_f: float = 0.0
    model_sigma: float = 0.0
    model_c1: float = 0.0
    model_g: float = 0.0
    model_theta1: float = 0.0
    predict_instances: str = "1,2,3,4,5,6,7,8"
    extra_tenants: dict = field(default_factory=dict)

    @property
    def tenants(self):
        """Tenant cluster names: mainCluster then mainCluster2, 3, ..."""
        return [self.main_cluster] + [self.extra_tenants[i] for i in sorted(self.extra_tenants)]

    def set(self, key, raw, lineno=None):
        value = _unquote(raw.strip())
        m = _TENANT_KEY.fullmatch(key)
        if m:
            self.extra_tenants[int(m.group(1))] = value
            return
        if key not in KEYS:
            log.warning("ignoring unknown configuration key %r%s", key, f" (line {lineno})" if lineno else "")
            return
        attr, conv, _ = KEYS[key]
        if value == "":
            setattr(self, attr, None)
            return
        try:
            setattr(self, attr, conv(value))
        except ValueError as exc:
            raise ConfigParseError(f"bad value for {key}: {exc}", lineno) from exc

    def to_properties(self):
        lines = []
        for key, (attr, _, _) in KEYS.items():
            value = getattr(self, attr)
            if value is not None:
                lines.append(f"{key}={_format(value)}")
        for i in sorted(self.extra_tenants):
            lines.append(f'mainCluster{i}="{self.extra_tenants[i]}"')
        return "\n".join(lines) + "\n"

    # -- fail-fast validation per use case ---------------------------------

    def require(self, *attrs):
        missing = [ATTR_KEYS[a] for a in attrs if getattr(self, a) is None]
        if missing:
            raise ConfigurationError(f"missing required key(s): {', '.join(missing)}")

    def validate_cluster(self):
        if not self.main_cluster or not self.sub_cluster:
            raise ConfigurationError("cluster names must be nonempty")
        if len(set(self.tenants)) != len(self.tenants):
            raise ConfigurationError("tenant cluster names must be distinct")
        if self.backup_count not in (0, 1):
            raise ConfigurationError("backupCount must be 0 or 1")
        if self.no_of_executions < 1 or self.simultaneous_instances < 1:
            raise ConfigurationError("noOfExecutions and simultaneousInstances must be positive")

    def validate_cloud(self):
        self.require("no_of_users")
        self.validate_cluster()
        self.simulation_config().validate()

    def validate_mapreduce(self):
        self.validate_cluster()
        if self.files_read < 0:
            raise ConfigurationError("filesRead must be non-negative")
        if self.map_reduce_size < 1:
            raise ConfigurationError("mapReduceSize must be at least 1")

    def validate_scaling(self):
        self.scaling_policy()

    def members(self):
        """Members to run: start ``simultaneousInstances``, then wait for ``noOfExecutions``."""
        return max(self.simultaneous_instances, self.no_of_executions)

    def simulation_config(self):
        from .simcore import SimulationConfig
        return SimulationConfig(
            num_users=self.no_of_users,
            num_datacenters=self.no_of_datacenters,
            hosts_per_datacenter=self.no_of_hosts,
            num_vms=self.no_of_vms,
            num_cloudlets=self.no_of_cloudlets,
            with_workload=self.with_workload,
            scheduler=self.scheduler,
            fairness_factor=self.fairness_factor,
            reference_seconds=self.reference_seconds,
            iterations_per_mi=self.iterations_per_mi,
            seed=self.seed,
        )

    def job_spec(self):
        from .mapreduce import MRJobSpec
        return MRJobSpec(self.load_folder, self.files_read, self.map_reduce_size, self.is_verbose)

    def scaling_policy(self, health_check_default=10.0):
        from .scaling import ScalingPolicy
        hc = self.time_between_health_checks
        try:
            return ScalingPolicy(
                metric=self.health_metric,
                max_threshold=self.high_threshold,
                min_threshold=self.low_threshold,
                max_instances=self.max_instances,
                time_between_health_checks=health_check_default if hc is None else hc,
                time_between_scaling_decisions=self.time_between_scaling_decisions,
                mode=self.scaling_mode,
            )
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc

    def cost_params(self):
        from .perfmodel import CostParams, ModelDomainError
        self.require("model_k", "model_t1")
        try:
            return CostParams(k=self.model_k, T1=self.model_t1, s=self.model_s, d=self.model_d,
                              w=self.model_w, N=self.model_n, F=self.model_f, sigma=self.model_sigma,
                              c1=self.model_c1, g=self.model_g, theta1=self.model_theta1)
        except ModelDomainError as exc:
            raise ConfigurationError(str(exc)) from exc

    def instance_counts(self):
        try:
            ns = [int(p) for p in self.predict_instances.split(",") if p.strip()]
        except ValueError as exc:
            raise ConfigurationError(f"predictInstances must be a comma list of integers: {exc}") from exc
        if not ns or any(n < 1 for n in ns):
            raise ConfigurationError("predictInstances must list positive integers")
        return ns


def _unquote(text):
    if len(text) >= 2 and text[0] == text[-1] == '"':
        return text[1:-1]
    return text


def parse_config_text(text, overrides=()):
    cfg = Config()
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigParseError(f"expected key=value, got {stripped!r}", lineno)
        key, _, value = stripped.partition("=")
        if not key.strip():
            raise ConfigParseError("empty key", lineno)
        cfg.set(key.strip(), value, lineno)
    apply_overrides(cfg, overrides)
    return cfg


def apply_overrides(cfg, overrides):
    for item in overrides:
        if "=" not in item:
            raise ConfigParseError(f"override {item!r} is not key=value")
        key, _, value = item.partition("=")
        cfg.set(key.strip(), value)
    return cfg


def parse_config(path=None, overrides=()):
    """Read ``path`` (or start from defaults when None) and apply ``key=value`` overrides."""
    if path is None:
        return parse_config_text("", overrides)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, overrides)
