"""Dynamic Source Routing without promiscuous listening.

Each data packet carries its whole route. Routes come from flooded requests
that accumulate the path they travel, are kept in a per-destination cache
(several routes per destination, oldest evicted first), and are pruned when a
route error reports a broken link. Only the origin salvages: a packet whose
first hop fails is re-sent once through another cached route or a new
discovery; packets failing further along are dropped and the origin is told.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..engine import TIMER
from ..packet import DSR_CTL, Packet
from .base import CORRUPT, LINK_BREAK, NO_ROUTE, PendingBuffer, RoutingAgent

DEFAULTS = dict(
    cache_capacity=4,
    cache_timeout=20.0,  # seconds a cached route stays usable; None keeps it until pruned
    cache_replies=True,
    reply_max_age=0.5,  # intermediates answer only from routes confirmed this recently
    rreq_timeout=0.5,
    rreq_retries=3,
    buffer_capacity=64,
    buffer_timeout=30.0,
)

RERR_BYTES = 20


def route_bytes(n_hops: int) -> int:
    return 16 + 4 * n_hops


@dataclass(frozen=True, slots=True)
class DsrRreq:
    request_id: int
    origin: int
    target: int
    route: tuple  # accumulated, starts with origin


@dataclass(frozen=True, slots=True)
class DsrRrep:
    route: tuple  # full origin -> target route
    learned_at: float  # when the oldest link information in ``route`` was last confirmed


@dataclass(frozen=True, slots=True)
class DsrRerr:
    broken: tuple  # (from, to)
    origin: int  # node the error is reported to


class RouteCache:
    """Per-destination source routes; every stored route starts at the owner."""

    def __init__(self, owner: int, capacity: int = 4, on_violation=None, timeout: float | None = None):
        self.owner = owner
        self.capacity = capacity
        self.timeout = timeout
        self.routes: dict[int, list[tuple[tuple, float]]] = {}
        self.on_violation = on_violation

    def add(self, route: tuple, now: float) -> None:
        """Cache ``route`` and every prefix of it (routes to the intermediate hops too).

        ``now`` is the route's timestamp: the moment its links were last known good.
        """
        route = tuple(route)
        if len(route) < 2 or route[0] != self.owner:
            return
        if len(set(route)) != len(route):
            if self.on_violation is not None:
                self.on_violation("dsr_cache_loop")
            return
        for k in range(1, len(route)):
            self._insert(route[:k + 1], now)

    def _insert(self, route: tuple, now: float) -> None:
        entries = self.routes.setdefault(route[-1], [])
        for i, (r, at) in enumerate(entries):
            if r == route:
                entries[i] = (r, max(at, now))
                return
        entries.append((route, now))
        if len(entries) > self.capacity:
            entries.remove(min(entries, key=lambda item: item[1]))

    def lookup(self, dest: int, now: float | None = None) -> tuple | None:
        """Shortest cached route; ties go to the most recently confirmed."""
        entry = self.lookup_entry(dest, now)
        return entry[0] if entry is not None else None

    def lookup_entry(self, dest: int, now: float | None = None) -> tuple[tuple, float] | None:
        """Like ``lookup`` but also returns the route's timestamp."""
        entries = self.routes.get(dest)
        if not entries:
            return None
        best = None
        for i, (route, at) in enumerate(entries):
            if self.timeout is not None and now is not None and now - at > self.timeout:
                continue
            key = (len(route), -at, -i)
            if best is None or key < best[0]:
                best = (key, (route, at))
        return best[1] if best is not None else None

    def prune_link(self, a: int, b: int) -> int:
        """Drop every route using the link a-b in either direction."""
        removed = 0
        for dest in list(self.routes):
            kept = [(r, at) for r, at in self.routes[dest] if not _uses_link(r, a, b)]
            removed += len(self.routes[dest]) - len(kept)
            if kept:
                self.routes[dest] = kept
            else:
                del self.routes[dest]
        return removed

    def all_routes(self):
        for entries in self.routes.values():
            for r, _ in entries:
                yield r


def _uses_link(route: tuple, a: int, b: int) -> bool:
    for u, v in zip(route, route[1:]):
        if (u == a and v == b) or (u == b and v == a):
            return True
    return False


class DsrAgent(RoutingAgent):
    name = "dsr"
    ctl_type = DSR_CTL

    def __init__(self, node, net, params=None):
        super().__init__(node, net, {**DEFAULTS, **(params or {})})
        p = self.params
        self.cache = RouteCache(node, p["cache_capacity"], net.recorder.violation, p["cache_timeout"])
        self.buffer = PendingBuffer(p["buffer_capacity"], p["buffer_timeout"])
        self.request_id = 0
        self.seen: set[tuple[int, int]] = set()
        self.discovery: dict[int, list] = {}  # target -> [retries so far, timer id]
        self.rrep_discarded = 0

    def next_hops(self) -> dict[int, int]:
        out = {}
        for dest in self.cache.routes:
            r = self._lookup(dest)
            if r is not None:
                out[dest] = r[1]
        return out

    def _lookup(self, dest: int):
        return self.cache.lookup(dest, self.now)

    # Sending ----------------------------------------------------------------
    def originate(self, pkt: Packet) -> None:
        if pkt.dst == self.node:
            self.deliver(pkt)
            return
        route = self._lookup(pkt.dst)
        if route is not None:
            self._send_along(pkt, route)
            return
        evicted = self.buffer.push(pkt, self.now)
        if evicted is not None:
            self.drop(evicted, NO_ROUTE)
        if pkt.dst not in self.discovery:
            self.discovery[pkt.dst] = [0, None]
            self._send_rreq(pkt.dst)

    def _send_along(self, pkt: Packet, route: tuple) -> None:
        pkt.route = route
        pkt.cursor = 0
        pkt.extra = 4 * len(route)
        self.forward_data(pkt, route[1])

    def _send_source_routed_ctl(self, body, size: int, path: tuple) -> None:
        pkt = self.control(body, size, path[-1])
        pkt.route = path
        pkt.cursor = 0
        self.send(pkt, path[1])

    # Discovery --------------------------------------------------------------
    def _send_rreq(self, target: int) -> None:
        state = self.discovery[target]
        self.request_id += 1
        self.seen.add((self.node, self.request_id))
        r = DsrRreq(self.request_id, self.node, target, (self.node,))
        self.broadcast(self.control(r, route_bytes(1)))
        wait = self.params["rreq_timeout"] * (2 ** state[0])
        state[1] = self.sim.schedule(self.now + wait, TIMER, self.node, self._discovery_timeout, target)

    def _discovery_timeout(self, target: int) -> None:
        state = self.discovery.get(target)
        if state is None:
            return
        if self._lookup(target) is not None:
            self._route_found(target)
            return
        state[0] += 1
        if state[0] <= self.params["rreq_retries"]:
            self._send_rreq(target)
            return
        del self.discovery[target]
        for pkt in self.buffer.take(target):
            self.drop(pkt, NO_ROUTE)

    def _learn(self, route: tuple, stamp: float | None = None) -> None:
        self.cache.add(route, self.now if stamp is None else stamp)
        for dest in route[1:]:
            if dest in self.discovery and self._lookup(dest) is not None:
                self._route_found(dest)

    def _route_found(self, target: int) -> None:
        state = self.discovery.pop(target, None)
        if state is not None and state[1] is not None:
            self.sim.cancel(state[1])
        for pkt in self.buffer.expired(self.now):
            self.drop(pkt, NO_ROUTE)
        for pkt in self.buffer.take(target):
            self.originate(pkt)

    def receive(self, pkt: Packet, prev: int, broadcast: bool) -> None:
        body = pkt.body
        if isinstance(body, DsrRreq):
            self.handle_rreq(body, prev)
            return
        if pkt.route is None or pkt.cursor + 1 >= len(pkt.route):
            self.drop(pkt, CORRUPT)
            return
        pkt.cursor += 1
        if pkt.route[pkt.cursor] != self.node:
            self.drop(pkt, CORRUPT)
            return
        if isinstance(body, DsrRrep):
            self._handle_rrep_hop(pkt)
        elif isinstance(body, DsrRerr):
            self._handle_rerr_hop(pkt)
        else:
            self.forward_source_routed(pkt)

    def handle_rreq(self, r: DsrRreq, prev: int) -> None:
        key = (r.origin, r.request_id)
        if key in self.seen or self.node in r.route:
            return
        self.seen.add(key)
        back = (self.node,) + tuple(reversed(r.route))
        self._learn(back)
        if r.target == self.node:
            full = r.route + (self.node,)
            self._send_source_routed_ctl(DsrRrep(full, self.now), route_bytes(len(full)), back)
            return
        entry = self.cache.lookup_entry(r.target, self.now) if self.params["cache_replies"] else None
        max_age = self.params["reply_max_age"]
        if entry is not None and max_age is not None and self.now - entry[1] > max_age:
            entry = None
        if entry is not None:
            cached, stamp = entry
            full = r.route + cached
            if len(set(full)) == len(full):
                # The reply is only as fresh as the cached half it was built from.
                self._send_source_routed_ctl(DsrRrep(full, stamp), route_bytes(len(full)), back)
                return
        fwd = DsrRreq(r.request_id, r.origin, r.target, r.route + (self.node,))
        self.broadcast(self.control(fwd, route_bytes(len(fwd.route))))

    def _handle_rrep_hop(self, pkt: Packet) -> None:
        full = pkt.body.route
        if self.node in full:
            i = full.index(self.node)
            self._learn(full[i:], pkt.body.learned_at)
            self._learn(tuple(reversed(full[:i + 1])), pkt.body.learned_at)
        if pkt.cursor == len(pkt.route) - 1:
            if full[0] != self.node:
                self.rrep_discarded += 1
            return
        self.send(pkt, pkt.route[pkt.cursor + 1])

    def forward_source_routed(self, pkt: Packet) -> None:
        route = pkt.route
        if route[pkt.cursor] != self.node:
            self.drop(pkt, CORRUPT)
            return
        if pkt.cursor == len(route) - 1:
            if pkt.dst == self.node:
                self.deliver(pkt)
            else:
                self.drop(pkt, CORRUPT)
            return
        self.forward_data(pkt, route[pkt.cursor + 1])

    # Maintenance ------------------------------------------------------------
    def link_failed(self, pkt: Packet, next_hop: int) -> None:
        self.handle_link_break(next_hop, pkt)

    def handle_link_break(self, next_hop: int, pkt: Packet) -> None:
        self.cache.prune_link(self.node, next_hop)
        if not pkt.is_data:
            self.drop(pkt, LINK_BREAK)
            return
        if pkt.src == self.node:
            if pkt.salvaged < 1:
                pkt.salvaged += 1
                self.originate(pkt)
            else:
                self.drop(pkt, LINK_BREAK)
            return
        self.drop(pkt, LINK_BREAK)
        back = tuple(reversed(pkt.route[:pkt.cursor + 1]))
        if len(back) >= 2:
            self._send_source_routed_ctl(DsrRerr((self.node, next_hop), pkt.src), RERR_BYTES, back)

    def _handle_rerr_hop(self, pkt: Packet) -> None:
        a, b = pkt.body.broken
        self.cache.prune_link(a, b)
        if pkt.cursor == len(pkt.route) - 1:
            self._reroute_queued(a, b)
            return
        self.send(pkt, pkt.route[pkt.cursor + 1])

    def _reroute_queued(self, a: int, b: int) -> None:
        """Pull our own data still queued on a route through a-b and send it again."""
        stale = self.net.macs[self.node].purge(
            lambda f: f.packet.is_data and f.packet.src == self.node and _uses_link(f.packet.route, a, b))
        for frame in stale:
            self.originate(frame.packet)

    def buffered_packets(self) -> list[Packet]:
        return self.buffer.packets()
