"""Discrete-event kernel: clock, event queue, cancellable timers, seeded streams."""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass, field
from typing import Any, Callable

GLOBAL = -1

# Event kinds used across the package; the kind selects the handler family.
DELIVER_FRAME = "deliver-frame"
TIMER = "timer"
WAYPOINT = "waypoint"
TRAFFIC_EMIT = "traffic-emit"

STREAM_LABELS = ("mobility", "traffic", "mac", "protocol")


class SchedulingError(ValueError):
    """Raised when an event is scheduled before the current clock."""


class EventFault(RuntimeError):
    """A handler raised; carries the event that was being dispatched."""

    def __init__(self, event: Event, cause: BaseException):
        super().__init__(
            f"handler for event #{event.sequence} ({event.kind}, target={event.target}) "
            f"at t={event.fire_at:.6f} raised {type(cause).__name__}: {cause}"
        )
        self.event = event
        self.cause = cause


@dataclass(order=False, eq=False)
class Event:
    fire_at: float
    sequence: int
    kind: str
    target: int
    handler: Callable[..., Any] | None = field(repr=False)
    args: tuple = field(default=(), repr=False)
    cancelled: bool = False
    fired: bool = False


def stream_seed(master_seed: int, label: str) -> int:
    """256-bit integer seed derived from ``sha256("<master_seed>:<label>")``."""
    digest = hashlib.sha256(f"{int(master_seed)}:{label}".encode()).digest()
    return int.from_bytes(digest, "big")


class RngStream(random.Random):
    """MT19937 stream keyed by (master seed, label).

    The algorithm identity is part of the reproducibility contract: the
    generator is CPython's Mersenne Twister seeded with the SHA-256 digest of
    ``"<seed>:<label>"`` interpreted as a big-endian integer.
    """

    def __new__(cls, master_seed: int = 0, label: str = "default"):
        return super().__new__(cls)

    def __init__(self, master_seed: int, label: str):
        if not label:
            raise ValueError("stream label must be non-empty")
        self.label = label
        self.master_seed = int(master_seed)
        super().__init__(stream_seed(master_seed, label))


class Simulator:
    """Single-threaded event engine.

    Events are ordered by ``(fire_at, sequence)``; the sequence number is the
    insertion order, so simultaneous events fire FIFO.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self.now = 0.0
        self._queue: list[tuple[float, int, Event]] = []
        self._seq = 0
        self._events: dict[int, Event] = {}
        self._last_key = (0.0, -1)
        self.dispatched = 0
        self._streams: dict[str, RngStream] = {}

    def schedule(self, fire_at: float, kind: str, target: int, handler: Callable[..., Any] | None = None,
                 *args) -> int:
        if fire_at < self.now:
            raise SchedulingError(f"cannot schedule at t={fire_at!r} before clock t={self.now!r}")
        seq = self._seq
        self._seq += 1
        ev = Event(float(fire_at), seq, kind, target, handler, args)
        self._events[seq] = ev
        heapq.heappush(self._queue, (ev.fire_at, seq, ev))
        return seq

    def schedule_in(self, delay: float, kind: str, target: int, handler: Callable[..., Any] | None = None,
                    *args) -> int:
        return self.schedule(self.now + delay, kind, target, handler, *args)

    def cancel(self, event_id: int) -> bool:
        ev = self._events.pop(event_id, None)
        if ev is None or ev.fired or ev.cancelled:
            return False
        ev.cancelled = True
        return True

    def pending(self, event_id: int) -> bool:
        return event_id in self._events

    def fire_time(self, event_id: int) -> float | None:
        """Scheduled time of a pending event, None once fired or cancelled."""
        ev = self._events.get(event_id)
        return None if ev is None else ev.fire_at

    def run(self, until: float) -> int:
        """Dispatch every event with ``fire_at <= until``; leaves the clock at ``until``."""
        if until < self.now:
            raise SchedulingError(f"run(until={until}) is before clock t={self.now}")
        queue = self._queue
        events = self._events
        count = 0
        pop = heapq.heappop
        while queue and queue[0][0] <= until:
            fire_at, seq, ev = pop(queue)
            if ev.cancelled:
                continue
            key = (fire_at, seq)
            if key < self._last_key:
                raise AssertionError(f"dispatch order violated: {key} after {self._last_key}")
            self._last_key = key
            del events[seq]
            ev.fired = True
            self.now = fire_at
            count += 1
            if ev.handler is not None:
                try:
                    ev.handler(*ev.args)
                except EventFault:
                    raise
                except Exception as exc:
                    raise EventFault(ev, exc) from exc
        self.now = float(until)
        self.dispatched += count
        return count

    def substream(self, label: str) -> RngStream:
        """Shared stream for ``label``; created on first use."""
        stream = self._streams.get(label)
        if stream is None:
            stream = self._streams[label] = RngStream(self.seed, label)
        return stream
