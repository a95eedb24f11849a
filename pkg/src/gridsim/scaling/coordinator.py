"""Multi-tenant coordinator and the node x experiment deployment matrix."""

import re
from collections import Counter
from dataclasses import dataclass

from ..datagrid import Cluster, ConfigurationError, get_cluster
from .board import ScalingBoard

MASTER = "S"
INITIATOR = "I"
COORDINATOR = "C"
ROLE_ORDER = (MASTER, INITIATOR, COORDINATOR)


@dataclass(frozen=True)
class TenantStatus:
    tenant: str
    members: int
    to_scale_out: bool
    to_scale_in: bool
    scaling_key: int
    workers: int


class Coordinator:
    """Holds a lite membership in every tenant cluster plus one in the coordination cluster."""

    def __init__(self, tenants, coordination="sub", node="coordinator", clusters=None):
        tenants = list(tenants)
        if len(set(tenants)) != len(tenants):
            raise ConfigurationError("tenant names must be distinct")
        if coordination in tenants:
            raise ConfigurationError("the coordination cluster cannot also be a tenant")
        clusters = clusters or {}
        self.node = node
        self.tenants = tenants
        self.clusters = {t: clusters.get(t) or get_cluster(t) for t in tenants}
        self.coordination = clusters.get(coordination) or get_cluster(coordination)
        self._memberships = [(c, c.join(label=f"{node}/{COORDINATOR}", lite=True))
                             for c in self.clusters.values()]
        self._memberships.append((self.coordination, self.coordination.join(label=f"{node}/{COORDINATOR}")))
        self.boards = {t: ScalingBoard(self.coordination, t) for t in tenants}
        for board in self.boards.values():
            board.init_health_map()

    def status(self, tenant) -> TenantStatus:
        out, in_, key, workers = self.boards[tenant].snapshot()
        return TenantStatus(tenant, len(self.clusters[tenant].member_ids), out, in_, key, workers)

    def view(self):
        """Combined status of every tenant, keyed by tenant name."""
        return {t: self.status(t) for t in self.tenants}

    def report(self):
        lines = ["tenant,members,to_scale_out,to_scale_in,scaling_key,workers"]
        for s in self.view().values():
            lines.append(f"{s.tenant},{s.members},{str(s.to_scale_out).lower()},"
                         f"{str(s.to_scale_in).lower()},{s.scaling_key},{s.workers}")
        return "\n".join(lines) + "\n"

    def detach(self):
        for cluster, member in self._memberships:
            cluster.remove(member.id)
        self._memberships.clear()


def _format_cell(roles: Counter):
    parts = []
    for role in ROLE_ORDER:
        n = roles.get(role, 0)
        if n:
            parts.append(role if n == 1 else f"{n}{role}")
    return "+".join(parts) or "0"


def parse_cell(text):
    """Inverse of the cell format: ``"S + 2I"`` -> Counter({'S': 1, 'I': 2})."""
    roles = Counter()
    text = text.replace(" ", "")
    if text == "0":
        return roles
    for part in text.split("+"):
        m = re.fullmatch(r"(\d*)([SIC])", part)
        if not m:
            raise ValueError(f"bad deployment cell {text!r}")
        roles[m.group(2)] += int(m.group(1) or 1)
    return roles


class Deployment:
    """Which roles each node plays in each experiment."""

    def __init__(self, nodes=(), experiments=()):
        self.nodes = list(nodes)
        self.experiments = list(experiments)
        self._cells = {}

    def add(self, node, experiment, role, count=1):
        if role not in ROLE_ORDER:
            raise ValueError(f"unknown role {role!r}")
        if node not in self.nodes:
            self.nodes.append(node)
        if experiment not in self.experiments:
            self.experiments.append(experiment)
        self._cells.setdefault((node, experiment), Counter())[role] += count

    def cell(self, node, experiment):
        return _format_cell(self._cells.get((node, experiment), Counter()))

    def matrix(self):
        return [[self.cell(n, e) for e in self.experiments] for n in self.nodes]

    def dump(self):
        header = [""] + list(self.experiments)
        rows = [header] + [[n] + r for n, r in zip(self.nodes, self.matrix())]
        width = max(len(c) for row in rows for c in row) + 2
        return "\n".join("".join(c.ljust(width) for c in row).rstrip() for row in rows) + "\n"

    @classmethod
    def from_clusters(cls, clusters, nodes=()):
        """Read roles back from member labels of the form ``node/ROLE``.

        ``clusters`` maps experiment name to cluster, in column order.
        """
        dep = cls(nodes, list(clusters))
        for exp, cluster in clusters.items():
            for member in list(cluster.members) + list(cluster.lite_members):
                node, _, role = member.id.label.partition("/")
                dep.add(node, exp, role.rstrip("0123456789") or INITIATOR)
        return dep


# node x experiment layout of a sample six-node, seven-cluster deployment
SAMPLE_LAYOUT = {
    "Exp_1": {"Node_1": "S", "Node_2": "I"},
    "Exp_2": {"Node_1": "S", "Node_2": "I", "Node_3": "2I"},
    "Exp_3": {"Node_1": "I", "Node_3": "S"},
    "Exp_4": {"Node_3": "I"},
    "Exp_5": {"Node_4": "S+I"},
    "Exp_6": {"Node_5": "I", "Node_6": "I"},
}
SAMPLE_COORDINATED = ("Exp_1", "Exp_2")
SAMPLE_NODES = tuple(f"Node_{i}" for i in range(1, 7))


def build_deployment(layout=None, coordinated=SAMPLE_COORDINATED, coordinator_node="Node_1",
                     nodes=SAMPLE_NODES, prefix="deploy-"):
    """Start real in-process clusters for ``layout`` and read the matrix back.

    Returns ``(deployment, clusters, coordinator)``; the coordinator joins
    the coordinated experiments plus its own coordination cluster, so the
    deployment spans ``len(layout) + 1`` clusters.
    """
    layout = layout or SAMPLE_LAYOUT
    clusters = {exp: Cluster(prefix + exp) for exp in layout}
    for exp, placement in layout.items():
        # masters join first so they hold the lowest ordinal
        for role in ROLE_ORDER:
            for node, cell in placement.items():
                for k in range(parse_cell(cell).get(role, 0)):
                    suffix = "" if role == MASTER else str(k)
                    clusters[exp].join(label=f"{node}/{role}{suffix}")
    coordination = Cluster(prefix + "coordination")
    by_name = {c.name: c for c in clusters.values()}
    by_name[coordination.name] = coordination
    coordinator = Coordinator([prefix + e for e in coordinated], coordination.name,
                              node=coordinator_node, clusters=by_name)
    return Deployment.from_clusters(clusters, nodes), clusters, coordinator
