"""Deterministic CPU-bound cloudlet workload.

The kernel iterates an integer polynomial followed by a bit rotation over
64-bit words, so it produces the same checksum on every platform.  A
numba-compiled copy releases the GIL, which lets members running in the
same process execute workloads in parallel; the pure-Python copy is the
fallback and the cross-check.
"""

import logging
import threading

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
_MUL = 0x9E3779B97F4A7C15
_ADD = 0xD1B54A32D192ED03
_SEED_MIX = 0xBF58476D1CE4E5B9

DEFAULT_ITERATIONS_PER_MI = 500


def kernel_python(seed: int, iterations: int) -> int:
    x = seed & MASK64
    for i in range(iterations):
        x = (3 * x * x + _MUL * x + _ADD + i) & MASK64
        x = ((x << 29) | (x >> 35)) & MASK64
        x ^= x >> 17
    return x


try:
    import numpy as np
    from numba import njit

    @njit(nogil=True, cache=True)
    def _kernel_numba(seed, iterations):
        x = np.uint64(seed)
        three = np.uint64(3)
        mul = np.uint64(_MUL)
        add = np.uint64(_ADD)
        s29 = np.uint64(29)
        s35 = np.uint64(35)
        s17 = np.uint64(17)
        for i in range(iterations):
            x = three * x * x + mul * x + add + np.uint64(i)
            x = (x << s29) | (x >> s35)
            x ^= x >> s17
        return x

    def kernel_native(seed: int, iterations: int) -> int:
        return int(_kernel_numba(np.uint64(seed & MASK64), np.int64(iterations)))

except ImportError:  # pragma: no cover - numba is optional
    kernel_native = None


def kernel(seed: int, iterations: int) -> int:
    if kernel_native is not None:
        return kernel_native(seed, iterations)
    return kernel_python(seed, iterations)


def workload_seed(cloudlet_id: int, global_seed: int = 0) -> int:
    return ((cloudlet_id + 1) * _SEED_MIX + global_seed * _MUL) & MASK64


def workload_iterations(length_mi, iterations_per_mi=DEFAULT_ITERATIONS_PER_MI) -> int:
    return int(round(length_mi * iterations_per_mi))


class WorkloadCounter:
    """Thread-safe tally of kernel iterations actually executed."""

    def __init__(self):
        self.iterations = 0
        self.runs = 0
        self._lock = threading.Lock()

    def add(self, iterations):
        with self._lock:
            self.iterations += iterations
            self.runs += 1


def run_cloudlet_workload(cloudlet, iterations_per_mi=DEFAULT_ITERATIONS_PER_MI,
                          global_seed=0, counter=None):
    """Checksum of the cloudlet's workload, or None when it carries none."""
    if not cloudlet.with_workload:
        return None
    iterations = workload_iterations(cloudlet.length_mi, iterations_per_mi)
    checksum = kernel(workload_seed(cloudlet.id, global_seed), iterations)
    if counter is not None:
        counter.add(iterations)
    return checksum


def warm_up():
    """Compile the native kernel ahead of timed runs."""
    kernel(1, 1)
