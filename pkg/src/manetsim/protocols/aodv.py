"""Ad hoc On-Demand Distance Vector routing.

Route discovery floods RREQs with an expanding ring, the destination (or an
intermediate node holding a route at least as fresh as the one requested)
unicasts an RREP back along the reverse routes, and MAC-detected link breaks
invalidate routes and travel upstream as RERRs to the precursor nodes.
There are no hello messages, no local repair and no gratuitous RREPs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..engine import TIMER
from ..packet import AODV_CTL, Packet
from .base import LINK_BREAK, NO_ROUTE, TTL, PendingBuffer, RoutingAgent

DEFAULTS = dict(
    active_route_timeout=3.0,
    node_traversal_time=0.040,
    ttl_ring=(1, 3, 5, 7),
    net_diameter=35,
    rreq_retries=2,
    buffer_capacity=64,
    buffer_timeout=30.0,
)

RREQ_BYTES = 24
RREP_BYTES = 20


def rerr_bytes(n: int) -> int:
    return 4 + 8 * n


@dataclass(slots=True)
class AodvRouteEntry:
    dest: int
    next_hop: int
    hop_count: int
    dest_seq: int
    valid: bool
    expires_at: float
    precursors: set = field(default_factory=set)


@dataclass(frozen=True, slots=True)
class Rreq:
    broadcast_id: int
    origin: int
    dest: int
    origin_seq: int
    dest_seq_known: int
    hop_count: int
    ttl: int


@dataclass(frozen=True, slots=True)
class Rrep:
    origin: int
    dest: int
    dest_seq: int
    hop_count: int
    lifetime: float


@dataclass(frozen=True, slots=True)
class Rerr:
    unreachable: tuple  # ((dest, dest_seq), ...)


class AodvAgent(RoutingAgent):
    name = "aodv"
    ctl_type = AODV_CTL

    def __init__(self, node, net, params=None):
        super().__init__(node, net, {**DEFAULTS, **(params or {})})
        p = self.params
        self.seq = 1
        self.broadcast_id = 0
        self.table: dict[int, AodvRouteEntry] = {}
        self.seen: set[tuple[int, int]] = set()
        self.buffer = PendingBuffer(p["buffer_capacity"], p["buffer_timeout"])
        self.discovery: dict[int, list] = {}  # dest -> [attempt index, timer id]
        rings = list(p["ttl_ring"])
        self.attempt_ttls = rings + [p["net_diameter"]] * (1 + p["rreq_retries"])
        self.rerr_discarded = 0
        self.rrep_discarded = 0

    # Route table ------------------------------------------------------------
    def route(self, dest: int) -> AodvRouteEntry | None:
        """Valid, unexpired entry for ``dest``; lazily expires stale ones."""
        e = self.table.get(dest)
        if e is None or not e.valid:
            return None
        if e.expires_at <= self.now:
            e.valid = False
            return None
        return e

    def expire_routes(self, now: float) -> int:
        n = 0
        for e in self.table.values():
            if e.valid and e.expires_at <= now:
                e.valid = False
                n += 1
        return n

    def next_hops(self) -> dict[int, int]:
        now = self.now
        return {d: e.next_hop for d, e in self.table.items() if e.valid and e.expires_at > now}

    def _set_seq(self, e: AodvRouteEntry, seq: int) -> None:
        if seq < e.dest_seq:
            self.net.recorder.violation("aodv_seq_decrease")
        e.dest_seq = seq

    def _update_route(self, dest, next_hop, hops, seq, lifetime) -> tuple[AodvRouteEntry, bool]:
        """Install the route if fresher (or equally fresh and shorter, or replacing an invalid one)."""
        e = self.table.get(dest)
        live = self.route(dest) is not None
        expires = self.now + lifetime
        if e is None:
            e = self.table[dest] = AodvRouteEntry(dest, next_hop, hops, seq, True, expires)
            return e, True
        if seq > e.dest_seq or (seq == e.dest_seq and (not live or hops < e.hop_count)):
            self._set_seq(e, seq)
            e.next_hop, e.hop_count, e.valid = next_hop, hops, True
            e.expires_at = expires
            return e, True
        if live and e.next_hop == next_hop and e.hop_count == hops:
            e.expires_at = max(e.expires_at, expires)
        return e, False

    def _refresh(self, dest: int) -> None:
        e = self.route(dest)
        if e is not None:
            e.expires_at = max(e.expires_at, self.now + self.params["active_route_timeout"])

    # Data path --------------------------------------------------------------
    def originate(self, pkt: Packet) -> None:
        if pkt.dst == self.node:
            self.deliver(pkt)
            return
        e = self.route(pkt.dst)
        if e is not None:
            self._forward(pkt, e)
            return
        evicted = self.buffer.push(pkt, self.now)
        if evicted is not None:
            self.drop(evicted, NO_ROUTE)
        if pkt.dst not in self.discovery:
            self.discovery[pkt.dst] = [0, None]
            self._send_rreq(pkt.dst)

    def _forward(self, pkt: Packet, e: AodvRouteEntry) -> None:
        self._refresh(pkt.dst)
        self._refresh(e.next_hop)
        self._refresh(pkt.src)
        self.forward_data(pkt, e.next_hop)

    def receive(self, pkt: Packet, prev: int, broadcast: bool) -> None:
        body = pkt.body
        if body is None:
            self._receive_data(pkt, prev)
        elif isinstance(body, Rreq):
            self.handle_rreq(body, prev)
        elif isinstance(body, Rrep):
            self.handle_rrep(body, prev, pkt)
        elif isinstance(body, Rerr):
            self.handle_rerr(body, prev)

    def _receive_data(self, pkt: Packet, prev: int) -> None:
        self._refresh(prev)
        if pkt.dst == self.node:
            self._refresh(pkt.src)
            self.deliver(pkt)
            return
        e = self.route(pkt.dst)
        if e is None:
            self.drop(pkt, NO_ROUTE)
            known = self.table.get(pkt.dst)
            seq = known.dest_seq if known else 0
            self.send(self.control(Rerr(((pkt.dst, seq),)), rerr_bytes(1), prev), prev)
            return
        self._forward(pkt, e)

    # Discovery --------------------------------------------------------------
    def _send_rreq(self, dest: int) -> None:
        state = self.discovery[dest]
        ttl = self.attempt_ttls[state[0]]
        self.seq += 1
        self.broadcast_id += 1
        known = self.table.get(dest)
        r = Rreq(self.broadcast_id, self.node, dest, self.seq, known.dest_seq if known else 0, 0, ttl)
        self.seen.add((self.node, self.broadcast_id))
        self.broadcast(self.control(r, RREQ_BYTES))
        wait = 2 * self.params["node_traversal_time"] * ttl
        state[1] = self.sim.schedule(self.now + wait, TIMER, self.node, self._discovery_timeout, dest)

    def _discovery_timeout(self, dest: int) -> None:
        state = self.discovery.get(dest)
        if state is None:
            return
        if self.route(dest) is not None:
            self._route_found(dest)
            return
        state[0] += 1
        if state[0] < len(self.attempt_ttls):
            self._send_rreq(dest)
            return
        del self.discovery[dest]
        for pkt in self.buffer.take(dest):
            self.drop(pkt, NO_ROUTE)

    def _route_found(self, dest: int) -> None:
        state = self.discovery.pop(dest, None)
        if state is not None and state[1] is not None:
            self.sim.cancel(state[1])
        for pkt in self.buffer.expired(self.now):
            self.drop(pkt, NO_ROUTE)
        for pkt in self.buffer.take(dest):
            e = self.route(dest)
            if e is None:
                self.originate(pkt)
            else:
                self._forward(pkt, e)

    def handle_rreq(self, r: Rreq, prev: int) -> None:
        key = (r.origin, r.broadcast_id)
        if key in self.seen:
            return
        self.seen.add(key)
        art = self.params["active_route_timeout"]
        rev, _ = self._update_route(r.origin, prev, r.hop_count + 1, r.origin_seq, art)
        if r.dest == self.node:
            if r.dest_seq_known > self.seq:
                self.seq = r.dest_seq_known
            rep = Rrep(r.origin, self.node, self.seq, 0, 2 * art)
            self.send(self.control(rep, RREP_BYTES, r.origin), prev)
            return
        e = self.route(r.dest)
        if e is not None and e.dest_seq >= r.dest_seq_known:
            e.precursors.add(prev)
            rev.precursors.add(e.next_hop)
            rep = Rrep(r.origin, r.dest, e.dest_seq, e.hop_count, e.expires_at - self.now)
            self.send(self.control(rep, RREP_BYTES, r.origin), prev)
            return
        if r.ttl <= 1:
            self.drop(self.control(r, RREQ_BYTES), TTL)
            return
        fwd = Rreq(r.broadcast_id, r.origin, r.dest, r.origin_seq, r.dest_seq_known, r.hop_count + 1, r.ttl - 1)
        self.broadcast(self.control(fwd, RREQ_BYTES))

    def handle_rrep(self, r: Rrep, prev: int, pkt: Packet | None = None) -> None:
        hops = r.hop_count + 1
        fwd, _ = self._update_route(r.dest, prev, hops, r.dest_seq,
                                    max(r.lifetime, self.params["active_route_timeout"]))
        if r.origin == self.node:
            if self.route(r.dest) is not None:
                self._route_found(r.dest)
            return
        rev = self.route(r.origin)
        if rev is None:
            self.rrep_discarded += 1
            return
        fwd.precursors.add(rev.next_hop)
        rev.precursors.add(prev)
        self._refresh(r.origin)
        out = Rrep(r.origin, r.dest, r.dest_seq, hops, r.lifetime)
        self.send(self.control(out, RREP_BYTES, r.origin), rev.next_hop)

    # Maintenance ------------------------------------------------------------
    def link_failed(self, pkt: Packet, next_hop: int) -> None:
        self.handle_link_break(next_hop, pkt)

    def handle_link_break(self, next_hop: int, failed: Packet | None = None) -> None:
        lost = []
        notify: set[int] = set()
        for e in self.table.values():
            if e.valid and e.next_hop == next_hop:
                e.valid = False
                self._set_seq(e, e.dest_seq + 1)
                lost.append((e.dest, e.dest_seq))
                notify |= e.precursors
        if failed is not None:
            self.drop(failed, LINK_BREAK)
        self._send_rerr(lost, notify - {next_hop})

    def _send_rerr(self, lost, precursors) -> None:
        if not lost:
            return
        body = Rerr(tuple(sorted(lost)))
        for p in sorted(precursors):
            self.send(self.control(body, rerr_bytes(len(lost)), p), p)

    def handle_rerr(self, rerr: Rerr, prev: int) -> None:
        lost = []
        notify: set[int] = set()
        for dest, seq in rerr.unreachable:
            e = self.table.get(dest)
            if e is None or not e.valid or e.next_hop != prev:
                continue
            e.valid = False
            self._set_seq(e, max(e.dest_seq, seq))
            lost.append((dest, e.dest_seq))
            notify |= e.precursors
        if not lost:
            self.rerr_discarded += 1
        self._send_rerr(lost, notify - {prev})

    def buffered_packets(self) -> list[Packet]:
        return self.buffer.packets()
