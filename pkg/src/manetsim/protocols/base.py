"""Plumbing shared by the routing agents."""

from __future__ import annotations

from collections import deque

from ..metrics import CTRL, DROP, FWD, RECV
from ..packet import BROADCAST, Packet

NO_ROUTE = "NO_ROUTE"
LINK_BREAK = "LINK_BREAK"
TTL = "TTL"
CORRUPT = "CORRUPT"


class RoutingAgent:
    """One node's routing logic; talks to the world only through ``net``."""

    name = "base"
    ctl_type = "ctl"

    def __init__(self, node: int, net, params: dict | None = None):
        self.node = node
        self.net = net
        self.sim = net.sim
        self.params = dict(params or {})
        self.rng = net.protocol_rng

    # Hooks -----------------------------------------------------------------
    def start(self) -> None:
        pass

    def originate(self, pkt: Packet) -> None:
        raise NotImplementedError

    def receive(self, pkt: Packet, prev: int, broadcast: bool) -> None:
        raise NotImplementedError

    def link_failed(self, pkt: Packet, next_hop: int) -> None:
        raise NotImplementedError

    def buffered_packets(self) -> list[Packet]:
        return []

    def next_hops(self) -> dict[int, int]:
        """Destination -> next hop over the entries currently usable for forwarding."""
        return {}

    # Helpers ---------------------------------------------------------------
    @property
    def now(self) -> float:
        return self.sim.now

    def control(self, body, size: int, dst: int = BROADCAST) -> Packet:
        return Packet(self.net.new_uid(), self.ctl_type, self.node, dst, size, self.now, body)

    def send(self, pkt: Packet, next_hop: int) -> bool:
        if not pkt.is_data:
            self.net.recorder.record(self.now, CTRL, self.node, pkt)
        mac = self.net.macs[self.node]
        return mac.send(mac.frame_for(pkt, next_hop))

    def broadcast(self, pkt: Packet) -> bool:
        return self.send(pkt, BROADCAST)

    def forward_data(self, pkt: Packet, next_hop: int) -> bool:
        if pkt.src != self.node:
            pkt.hop_limit -= 1
            if pkt.hop_limit <= 0:
                self.drop(pkt, TTL)
                return False
            self.net.recorder.record(self.now, FWD, self.node, pkt)
        return self.send(pkt, next_hop)

    def deliver(self, pkt: Packet) -> None:
        self.net.recorder.record(self.now, RECV, self.node, pkt)

    def drop(self, pkt: Packet, reason: str) -> None:
        self.net.recorder.record(self.now, DROP, self.node, pkt, reason)


class PendingBuffer:
    """Per-destination FIFO of packets waiting for a route."""

    def __init__(self, capacity: int = 64, max_age: float = 30.0):
        self.capacity = capacity
        self.max_age = max_age
        self.queues: dict[int, deque] = {}

    def push(self, pkt: Packet, now: float) -> Packet | None:
        """Queue ``pkt``; returns the evicted oldest packet on overflow."""
        q = self.queues.setdefault(pkt.dst, deque())
        evicted = q.popleft()[0] if len(q) >= self.capacity else None
        q.append((pkt, now + self.max_age))
        return evicted

    def expired(self, now: float) -> list[Packet]:
        out = []
        for q in self.queues.values():
            while q and q[0][1] <= now:
                out.append(q.popleft()[0])
        return out

    def take(self, dst: int) -> list[Packet]:
        q = self.queues.pop(dst, None)
        return [p for p, _ in q] if q else []

    def has(self, dst: int) -> bool:
        return bool(self.queues.get(dst))

    def packets(self) -> list[Packet]:
        return [p for q in self.queues.values() for p, _ in q]
