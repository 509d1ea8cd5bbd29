"""Random CBR connections (cbrgen style) and the constant-bit-rate sources."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from .packet import CBR, Packet

DEFAULT_RATE = 4.0
DEFAULT_PAYLOAD = 512


@dataclass(frozen=True)
class Flow:
    src: int
    dst: int
    start_at: float
    rate: float = DEFAULT_RATE
    payload: int = DEFAULT_PAYLOAD

    def __post_init__(self):
        if self.src == self.dst:
            raise ValueError("flow source and destination must differ")
        if self.rate <= 0:
            raise ValueError("flow rate must be positive")

    def emission_times(self, duration: float):
        """Emission instants ``start + k/rate`` strictly before ``duration``."""
        k = 0
        while True:
            t = self.start_at + k / self.rate
            if t >= duration:
                return
            yield t
            k += 1


def generate_connections(n_nodes: int, max_conn: int, rate: float, rng, payload: int = DEFAULT_PAYLOAD,
                         start_window: float = 10.0) -> list[Flow]:
    """``max_conn`` flows between distinct ordered node pairs.

    Pairs are drawn source-then-destination and a repeated pair is redrawn.
    When fewer than ``max_conn`` pairs exist, every pair gets one flow.
    """
    if max_conn < 0:
        raise ValueError("max_conn must be non-negative")
    if max_conn == 0:
        return []
    if n_nodes < 2:
        raise ValueError("need at least two nodes to create a connection")
    flows = []
    used = set()
    target = min(max_conn, n_nodes * (n_nodes - 1))
    while len(flows) < target:
        src = rng.randrange(n_nodes)
        dst = rng.randrange(n_nodes - 1)
        if dst >= src:
            dst += 1
        if (src, dst) in used:
            continue
        used.add((src, dst))
        start = round(rng.uniform(0.0, start_window), 6)
        flows.append(Flow(src, dst, start, rate, payload))
    return flows


class CbrSource:
    """Runtime emitter for one flow."""

    def __init__(self, flow: Flow, duration: float, new_uid):
        self.flow = flow
        self.duration = duration
        self.new_uid = new_uid
        self.k = 0
        self.sent = 0

    def next_time(self) -> float | None:
        t = self.flow.start_at + self.k / self.flow.rate
        return t if t < self.duration else None

    def emit(self, now: float) -> tuple[Packet, float | None]:
        """Packet stamped at ``now`` and the next emission time (None when done)."""
        if now < self.flow.start_at:
            raise ValueError("flow has not started yet")
        f = self.flow
        pkt = Packet(self.new_uid(), CBR, f.src, f.dst, f.payload, now)
        self.k += 1
        self.sent += 1
        return pkt, self.next_time()


def flows_to_json(flows: list[Flow]) -> str:
    return json.dumps([asdict(f) for f in flows], indent=1)


def flows_from_json(text: str) -> list[Flow]:
    return [Flow(**item) for item in json.loads(text)]
