import heapq
import itertools
from dataclasses import dataclass, field


@dataclass(order=True)
class SimEvent:
    time: float
    seq: int
    target: int = field(compare=False)
    tag: str = field(compare=False)
    payload: object = field(default=None, compare=False)


class EventQueue:
    """Future-event list ordered by timestamp, then insertion order."""

    def __init__(self):
        self._heap = []
        self._seq = itertools.count()

    def push(self, time, target, tag, payload=None):
        if time < 0:
            raise ValueError("event time must be non-negative")
        event = SimEvent(float(time), next(self._seq), target, tag, payload)
        heapq.heappush(self._heap, event)
        return event

    def pop(self) -> SimEvent:
        return heapq.heappop(self._heap)

    def __len__(self):
        return len(self._heap)

    def __bool__(self):
        return bool(self._heap)

    def clear(self):
        self._heap.clear()
