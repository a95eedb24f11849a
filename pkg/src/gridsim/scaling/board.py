"""Shared scaling state: per-tenant flags and the arbitration key.

The flags are plain map entries in the coordination cluster; the key is an
atomic cell and is the only thing that decides who acts.  Key values: 0 idle,
1 scale-out in progress, -1 scale-in in progress, TERMINATE_ALL tear down.
"""

import threading
from functools import partial

TERMINATE_ALL = -999
HEALTH_MAP = "nodeHealth"


class ScalingBoard:
    def __init__(self, grid, tenant):
        self.grid = grid
        self.tenant = tenant
        self._map = grid.get_map(HEALTH_MAP)
        self.key = grid.get_atomic(f"{tenant}.scalingKey")
        self.workers = grid.get_atomic(f"{tenant}.workers")
        self._out = f"{tenant}.toScaleOut"
        self._in = f"{tenant}.toScaleIn"

    def init_health_map(self):
        """Create both flags as False unless another node already did."""
        self._map.put_if_absent(self._out, False)
        self._map.put_if_absent(self._in, False)

    def scale_out_flag(self):
        return bool(self._map.get(self._out, False))

    def scale_in_flag(self):
        return bool(self._map.get(self._in, False))

    def set_scale_out(self, value):
        self._map.put(self._out, bool(value))

    def set_scale_in(self, value):
        self._map.put(self._in, bool(value))

    # single-step callables for activities
    def op_set_out(self, value):
        return partial(self.set_scale_out, value)

    def op_set_in(self, value):
        return partial(self.set_scale_in, value)

    def op_claim(self, value):
        return partial(self.key.compare_exchange, 0, value)

    def op_release(self, value):
        return partial(self.key.compare_exchange, value, 0)

    def snapshot(self):
        return (self.scale_out_flag(), self.scale_in_flag(), self.key.get(), self.workers.get())

    def clear(self):
        """Remove every object this tenant holds in the coordination cluster."""
        self._map.remove(self._out)
        self._map.remove(self._in)
        self.grid.map_remove("__atomic__", self.key.name)
        self.grid.map_remove("__atomic__", self.workers.name)


class LocalRequests:
    """Node-local scale-out / scale-in request flags (set by the health loop)."""

    def __init__(self):
        self._lock = threading.Lock()
        self._out = False
        self._in = False

    def request_out(self):
        with self._lock:
            self._out = True

    def request_in(self):
        with self._lock:
            self._in = True

    def take_out(self):
        with self._lock:
            was, self._out = self._out, False
            return was

    def take_in(self):
        with self._lock:
            was, self._in = self._in, False
            return was

    def peek(self):
        with self._lock:
            return (self._out, self._in)
