"""A one-tenant scaling system for the deterministic scheduler."""

from gridsim.datagrid import Cluster
from gridsim.scaling import ClusterSpawner, Node, ScalingBoard, ScalingEventLog, ScalingPolicy, VirtualScheduler, ias_loop

POLICY = ScalingPolicy()  # 0.15 / 0.02, 3 instances, 10 s checks, 60 s hold


class World:
    """One tenant: coordination grid with the board, simulation grid, N arbitrating nodes."""

    def __init__(self, sched, n_nodes, policy=POLICY, preset_instances=0):
        self.sched = sched
        self.clock = sched.clock
        self.policy = policy
        self.coord = Cluster("w-coord", partition_count=7)
        self.coord.join()
        self.sim = Cluster("w-sim", partition_count=7, backup_count=1)
        self.sim.join(label="master")
        self.board = ScalingBoard(self.coord, "w")
        self.board.init_health_map()
        self.events = ScalingEventLog()
        spawner = ClusterSpawner(self.sim)
        self.nodes = [Node(f"n{i}", "w", spawner, self.clock) for i in range(n_nodes)]
        for node in self.nodes[:preset_instances]:
            node.spawn()
        self.board.workers.set(preset_instances)

    def members(self):
        return len(self.sim.member_ids)

    def fingerprint(self):
        return (self.board.snapshot(), self.members(), self.events.fingerprint(),
                tuple(n.fingerprint() for n in self.nodes))

    def close(self):
        self.sim.shutdown()
        self.coord.shutdown()


def one_decision_world(n_nodes, loop=ias_loop, direction="out"):
    def build(chooser):
        sched = VirtualScheduler(chooser)
        world = World(sched, n_nodes, preset_instances=n_nodes if direction == "in" else 0)
        if direction == "out":
            world.board.set_scale_out(True)
        else:
            world.board.set_scale_in(True)
        for node in world.nodes:
            sched.spawn(node.name, loop(world.board, node, POLICY, world.clock, world.events,
                                        max_iterations=2))
        return sched, world
    return build


def check_single(action):
    def check(world):
        try:
            assert world.events.count(action) == 1, world.events.to_csv()
            assert world.board.key.get() == 0
            assert not world.board.scale_out_flag() and not world.board.scale_in_flag()
        finally:
            world.close()
    return check
