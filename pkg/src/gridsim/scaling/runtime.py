"""Generator-based activities with a virtual-clock or a real-time driver.

An activity is a generator that yields either :class:`Wait` (sleep on the
activity's clock) or a zero-argument callable.  A callable is one shared
state access: the driver runs it and sends its result back in.  Because
every access to shared state is a separate step, the virtual scheduler can
interleave activities at exactly those points, and :func:`explore` can walk
every interleaving of a small system.
"""

import random
import threading
import time
from dataclasses import dataclass


@dataclass(frozen=True)
class Wait:
    seconds: float

    def __post_init__(self):
        if self.seconds < 0:
            raise ValueError("cannot wait a negative time")


class StopSignal:
    def __init__(self):
        self._event = threading.Event()

    def set(self):
        self._event.set()

    def is_set(self):
        return self._event.is_set()

    def wait(self, timeout):
        return self._event.wait(timeout)


class _Activity:
    def __init__(self, name, gen):
        self.name = name
        self.gen = gen
        self.op = None
        self.wake = None
        self.done = False
        self.history = []

    def feed(self, value, now):
        """Send ``value`` in and park the activity on whatever it yields next."""
        try:
            item = self.gen.send(value)
        except StopIteration:
            self.done = True
            self.op = self.wake = None
            return
        if isinstance(item, Wait):
            self.op = None
            self.wake = now + item.seconds
        elif callable(item):
            self.op = item
            self.wake = None
        else:
            raise TypeError(f"activity {self.name} yielded {item!r}")

    def key(self):
        return (self.name, self.done, self.wake, _frame_key(self.gen))


_PRIMITIVES = (bool, int, float, str, bytes, type(None))


def _plain(value):
    if isinstance(value, _PRIMITIVES):
        return True
    if isinstance(value, tuple):
        return all(_plain(v) for v in value)
    return False


def _frame_key(gen):
    """Local state of a suspended generator chain: code position and plain locals.

    Non-plain locals are handles to shared objects (captured by the world
    fingerprint) or helpers fixed by the code position, so they are left out.
    """
    parts = []
    while gen is not None and getattr(gen, "gi_frame", None) is not None:
        frame = gen.gi_frame
        local = tuple(sorted((k, v) for k, v in frame.f_locals.items() if _plain(v)))
        parts.append((frame.f_code.co_name, frame.f_lasti, local))
        gen = gen.gi_yieldfrom
    return tuple(parts)


# -- choosers -------------------------------------------------------------


class FifoChooser:
    """Always run the earliest-registered ready activity."""

    def __call__(self, ready, scheduler):
        return 0


class RandomChooser:
    def __init__(self, seed=0):
        self.rng = random.Random(seed)

    def __call__(self, ready, scheduler):
        return self.rng.randrange(len(ready))


class ScriptedChooser:
    """Follow a fixed list of choices, then always pick the first option."""

    def __init__(self, script=()):
        self.script = list(script)
        self.points = []

    def __call__(self, ready, scheduler):
        depth = len(self.points)
        choice = self.script[depth] if depth < len(self.script) else 0
        self.points.append(len(ready))
        return choice


# -- drivers --------------------------------------------------------------


class VirtualClock:
    def __init__(self, start=0.0):
        self._now = float(start)

    def now(self):
        return self._now

    def _advance(self, t):
        if t < self._now:
            raise ValueError("virtual clock cannot go backwards")
        self._now = t


class VirtualScheduler:
    """Deterministic driver: time jumps to the next wake-up when nobody is ready."""

    def __init__(self, chooser=None, clock=None):
        self.chooser = chooser or FifoChooser()
        self.clock = clock or VirtualClock()
        self.activities = []
        self.steps = 0

    def now(self):
        return self.clock.now()

    def spawn(self, name, gen):
        act = _Activity(name, gen)
        self.activities.append(act)
        act.feed(None, self.now())
        return act

    def ready(self):
        return [a for a in self.activities if a.op is not None]

    def state_key(self):
        return (self.now(), tuple(a.key() for a in self.activities))

    def _wake_sleepers(self, until):
        sleepers = [a for a in self.activities if a.wake is not None]
        if not sleepers:
            return False
        t = min(a.wake for a in sleepers)
        if until is not None and t > until:
            return False
        self.clock._advance(t)
        for act in sleepers:
            if act.wake == t:
                act.feed(None, t)
        return True

    def step(self):
        ready = self.ready()
        act = ready[self.chooser(ready, self)]
        op, act.op = act.op, None
        result = op()
        act.history.append(_fingerprint_value(result))
        self.steps += 1
        act.feed(result, self.now())

    def run(self, until=None, max_steps=1_000_000):
        """Run until every activity finished, or the clock would pass ``until``."""
        while self.steps < max_steps:
            if self.ready():
                self.step()
            elif not self._wake_sleepers(until):
                break
        else:
            raise RuntimeError(f"scheduler exceeded {max_steps} steps")
        return self

    def close(self):
        for act in self.activities:
            act.gen.close()


def _fingerprint_value(value):
    try:
        hash(value)
        return value
    except TypeError:
        return repr(value)


class WallClock:
    def __init__(self):
        self._start = time.monotonic()

    def now(self):
        return time.monotonic() - self._start


class RealTimeRunner:
    """Run each activity on its own thread with real sleeps."""

    def __init__(self, stop=None, clock=None):
        self.stop = stop or StopSignal()
        self.clock = clock or WallClock()
        self._threads = []
        self.errors = []

    def now(self):
        return self.clock.now()

    def spawn(self, name, gen):
        th = threading.Thread(target=self._drive, args=(gen,), name=name, daemon=True)
        self._threads.append(th)
        th.start()
        return th

    def _drive(self, gen):
        value = None
        try:
            while True:
                item = gen.send(value)
                value = None
                if isinstance(item, Wait):
                    self.stop.wait(item.seconds)
                else:
                    value = item()
        except StopIteration:
            pass
        except Exception as exc:
            self.errors.append(exc)
            self.stop.set()

    def join(self, timeout=None):
        deadline = None if timeout is None else time.monotonic() + timeout
        for th in self._threads:
            th.join(None if deadline is None else max(0.0, deadline - time.monotonic()))
        if self.errors:
            raise self.errors[0]
        return all(not th.is_alive() for th in self._threads)


# -- exhaustive exploration -------------------------------------------------


class _Pruned(Exception):
    pass


@dataclass
class ExplorationResult:
    runs: int
    pruned: int
    states: int


class _ExploringChooser:
    def __init__(self, prefix, visited, world_key):
        self.prefix = prefix
        self.visited = visited
        self.world_key = world_key
        self.points = []

    def __call__(self, ready, scheduler):
        depth = len(self.points)
        if depth >= len(self.prefix):
            state = (self.world_key(), scheduler.state_key())
            if state in self.visited:
                raise _Pruned()
            self.visited.add(state)
        choice = self.prefix[depth] if depth < len(self.prefix) else 0
        self.points.append(len(ready))
        return choice


def explore(build, check, max_runs=1_000_000, until=None):
    """Depth-first walk over every interleaving of the system made by ``build``.

    ``build(chooser)`` returns ``(scheduler, world)`` with the activities
    spawned; ``world.fingerprint()`` must capture all shared state that
    ``check(world)`` inspects.  States already explored are pruned, so the
    walk covers every distinct reachable outcome without replaying it twice.
    """
    visited = set()
    stack = [[]]
    runs = pruned = 0
    while stack:
        if runs + pruned >= max_runs:
            raise RuntimeError("exploration budget exhausted")
        prefix = stack.pop()
        holder = {}
        chooser = _ExploringChooser(prefix, visited, lambda: holder["world"].fingerprint())
        scheduler, world = build(chooser)
        holder["world"] = world
        try:
            scheduler.run(until=until)
        except _Pruned:
            pruned += 1
        else:
            runs += 1
            check(world)
        finally:
            scheduler.close()
        for depth in range(len(prefix), len(chooser.points)):
            base = prefix + [0] * (depth - len(prefix))
            for alt in range(1, chooser.points[depth]):
                stack.append(base + [alt])
    return ExplorationResult(runs, pruned, len(visited))
