"""The scaling activities: health loop, probe, arbitration loop, teardown.

Every function here is a generator activity (see :mod:`.runtime`): a yielded
callable is one step against shared state, a yielded :class:`Wait` sleeps on
the driver's clock.  The arbitration key is claimed with a compare-exchange
from 0, so a node that loses the race leaves the key untouched; the same
rule lets teardown wait for any in-flight action before it takes the key.
"""

import logging
from functools import partial

from .board import TERMINATE_ALL
from .eventlog import CLEAR, SHUTDOWN, SPAWN, TERMINATE
from .runtime import Wait

log = logging.getLogger(__name__)


def _attempt(fn):
    """Wrap ``fn`` as a step that returns ``(ok, value_or_exception)``."""
    def step():
        try:
            return True, fn()
        except Exception as exc:
            return False, exc
    return step


def _running(stop):
    return stop is None or not stop.is_set()


def dynamic_scaling_loop(policy, source, requests, spawned, clock, stop=None):
    """Sample health and raise local scale requests; ends when the source runs dry.

    ``spawned`` is a zero-argument callable giving the tenant's current
    number of spawned workers.
    """
    while _running(stop):
        snap = yield (lambda: source.sample(clock.now()))
        if snap is None:
            return
        load = snap.metric(policy.metric)
        if load >= policy.max_threshold and (yield spawned) < policy.max_instances:
            yield requests.request_out
            yield Wait(policy.time_between_scaling_decisions)
        elif load <= policy.min_threshold:
            yield requests.request_in
            yield Wait(policy.time_between_scaling_decisions)
        else:
            yield Wait(policy.time_between_health_checks)


def probe_loop(board, requests, policy, stop=None, max_iterations=None):
    """Publish the master's local requests to the shared board."""
    i = 0
    while _running(stop) and (max_iterations is None or i < max_iterations):
        i += 1
        yield Wait(policy.time_between_health_checks)
        if not _running(stop):
            return
        if (yield requests.take_out):
            yield board.op_set_out(True)
            yield board.op_set_in(False)
        elif (yield requests.take_in):
            yield board.op_set_in(True)
            yield board.op_set_out(False)


def _release_ref(board, tenant, actor, clock, event_log, members):
    remaining = yield partial(board.workers.add_and_get, -1)
    if remaining == 0:
        def clear():
            board.clear()
            event_log.record(clock.now(), tenant, CLEAR, actor, members())
        yield clear


def _scale_out(board, node, policy, clock, event_log, members):
    total = yield partial(board.workers.add_and_get, 1)
    if total > policy.max_instances:
        log.info("node %s: spawn refused, tenant %s already has %d workers", node.name, node.tenant, total - 1)
        yield partial(board.workers.add_and_get, -1)
        yield board.op_release(1)
        return

    def spawn():
        handle = node.spawn()
        event_log.record(clock.now(), node.tenant, SPAWN, node.name, members())
        return handle

    ok, outcome = yield _attempt(spawn)
    if not ok:
        log.warning("node %s: spawn failed (%s); handing the decision back", node.name, outcome)
        yield partial(board.workers.add_and_get, -1)
        yield board.op_release(1)
        yield board.op_set_out(True)
        return
    yield Wait(policy.time_between_scaling_decisions)
    yield board.op_release(1)


def _shutdown_step(node, clock, event_log, members):
    def shutdown():
        handle = node.shutdown()
        event_log.record(clock.now(), node.tenant, SHUTDOWN, node.name, members())
        return handle
    return _attempt(shutdown)


def _scale_in(board, node, policy, clock, event_log, members):
    ok, outcome = yield _shutdown_step(node, clock, event_log, members)
    if not ok:
        log.warning("node %s: shutdown failed (%s); handing the decision back", node.name, outcome)
        yield board.op_release(-1)
        yield board.op_set_in(True)
        return
    yield partial(board.workers.add_and_get, -1)
    yield Wait(policy.time_between_scaling_decisions)
    yield board.op_release(-1)


def ias_loop(board, node, policy, clock, event_log, stop=None, max_iterations=None):
    """Arbitrate published decisions for one node, which runs 0 or 1 workers."""
    members = node.spawner.member_count
    yield board.init_health_map
    i = 0
    while _running(stop) and (max_iterations is None or i < max_iterations):
        i += 1
        yield Wait(policy.time_between_health_checks)
        if not _running(stop):
            return
        key = yield board.key.get
        if key == TERMINATE_ALL:
            if node.instance_count:
                ok, outcome = yield _shutdown_step(node, clock, event_log, members)
                if not ok:
                    log.error("node %s: shutdown during teardown failed: %s", node.name, outcome)
                yield from _release_ref(board, node.tenant, node.name, clock, event_log, members)
            return
        if node.instance_count == 0:
            if (yield board.scale_out_flag):
                yield board.op_set_out(False)
                claim = yield board.op_claim(1)
                if claim.swapped:
                    yield from _scale_out(board, node, policy, clock, event_log, members)
        elif (yield board.scale_in_flag):
            yield board.op_set_in(False)
            claim = yield board.op_claim(-1)
            if claim.swapped:
                yield from _scale_in(board, node, policy, clock, event_log, members)


def terminate_loop(board, tenant, policy, clock, event_log, members, actor="master"):
    """Tell every worker of ``tenant`` to stop once no scaling action is in flight.

    The terminator holds one reference on the worker counter while it
    works, so whichever party drops the counter to zero last, worker or
    terminator, is the one that clears the tenant's shared objects.
    """
    yield partial(board.workers.add_and_get, 1)
    while True:
        claim = yield board.op_claim(TERMINATE_ALL)
        if claim.swapped or claim.witnessed == TERMINATE_ALL:
            break
        yield Wait(policy.time_between_health_checks)
    if claim.swapped:
        yield lambda: event_log.record(clock.now(), tenant, TERMINATE, actor, members())
    yield from _release_ref(board, tenant, actor, clock, event_log, members)


def auto_scaler_loop(requests, node, policy, clock, event_log, stop=None):
    """Auto mode: act on the master's own requests by spawning on its node."""
    members = node.spawner.member_count
    while _running(stop):
        yield Wait(policy.time_between_health_checks)
        if not _running(stop):
            return
        acted = False
        if (yield requests.take_out):
            if node.instance_count < policy.max_instances:
                def spawn():
                    node.spawn()
                    event_log.record(clock.now(), node.tenant, SPAWN, node.name, members())
                ok, outcome = yield _attempt(spawn)
                acted = ok
                if not ok:
                    log.warning("auto spawn failed: %s", outcome)
        elif (yield requests.take_in):
            if node.instance_count:
                ok, _ = yield _shutdown_step(node, clock, event_log, members)
                acted = ok
        if acted:
            yield Wait(policy.time_between_scaling_decisions)
