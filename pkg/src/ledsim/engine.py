"""Discrete-event engine: virtual clock, ordered event queue, seeded RNG.

Events with equal fire times pop in insertion order, so a run is a pure
function of its configuration and seed.
"""

from __future__ import annotations

import heapq
import itertools
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable


class EventKind(Enum):
    PACKET_ARRIVES_AT_QUEUE = "arrive"
    PACKET_DEPARTS = "depart"
    ACK_DELIVERED = "ack"
    CHUNK_DONE = "chunk"
    SAMPLE = "sample"
    FLOW_START = "start"
    FLOW_STOP = "stop"
    TIMEOUT = "timeout"


class SchedulingError(RuntimeError):
    """An event was scheduled in the past."""


@dataclass(slots=True)
class Event:
    fire_time: float
    seq: int
    kind: EventKind
    payload: Any = None
    cancelled: bool = False


@dataclass
class SimulationTrace:
    """Sample records emitted by handlers during a run."""

    samples: list = field(default_factory=list)
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.samples)


class Engine:
    """Single-threaded event loop.

    Handlers are registered per ``EventKind`` and called as
    ``handler(engine, event)``. Cancellation is lazy: cancelled events stay
    in the heap and are skipped when popped.
    """

    def __init__(self, seed: int = 0):
        self.now = 0.0
        self.seed = seed
        self.rng = random.Random(seed)
        self.trace = SimulationTrace()
        self._heap: list[tuple[float, int, Event]] = []
        self._counter = itertools.count()
        self._handlers: dict[EventKind, Callable[[Engine, Event], None]] = {}
        self.fired = 0

    def on(self, kind: EventKind, handler: Callable[["Engine", Event], None]) -> None:
        self._handlers[kind] = handler

    def schedule(self, fire_time: float, kind: EventKind, payload: Any = None) -> Event:
        if fire_time < self.now:
            raise SchedulingError(
                f"cannot schedule {kind.name} at {fire_time!r}: clock is at {self.now!r}"
            )
        seq = next(self._counter)
        ev = Event(fire_time, seq, kind, payload)
        heapq.heappush(self._heap, (fire_time, seq, ev))
        return ev

    def schedule_in(self, delay: float, kind: EventKind, payload: Any = None) -> Event:
        return self.schedule(self.now + delay, kind, payload)

    @staticmethod
    def cancel(event: Event) -> None:
        event.cancelled = True

    def pending(self) -> int:
        return sum(1 for _, _, ev in self._heap if not ev.cancelled)

    def run_until(self, t_end: float) -> SimulationTrace:
        if t_end < self.now:
            raise SchedulingError(f"t_end={t_end!r} is before now={self.now!r}")
        heap = self._heap
        handlers = self._handlers
        pop = heapq.heappop
        while heap and heap[0][0] <= t_end:
            ev = pop(heap)[2]
            if ev.cancelled:
                continue
            self.now = ev.fire_time
            self.fired += 1
            handler = handlers.get(ev.kind)
            if handler is None:
                # unhandled samples are recorded verbatim
                if ev.kind is EventKind.SAMPLE:
                    self.trace.samples.append((ev.fire_time, ev.payload))
                continue
            handler(self, ev)
        self.now = t_end
        return self.trace
