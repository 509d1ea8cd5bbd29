"""Destination-Sequenced Distance Vector routing.

Every node keeps a hop-count route to every destination it has heard of,
stamped with the destination's sequence number (even: reachable, odd: broken
with metric infinity). Tables are exchanged by periodic broadcasts, full
dumps every third period and incremental ones in between, plus rate-limited
triggered updates when a metric changes or a link breaks. An equally fresh
but shorter route is used at once but only advertised after a settling time.
Packets without a usable route are dropped on the spot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..engine import TIMER
from ..packet import DSDV_CTL, Packet
from .base import LINK_BREAK, NO_ROUTE, RoutingAgent

INF = math.inf

DEFAULTS = dict(
    update_interval=15.0,
    full_dump_every=3,
    settling_time=6.0,
    jitter=1.0,
    trigger_gap=1.0,
    route_hold=30.0,  # how long a valid route is kept over a longer one with a newer number
)


def update_bytes(n_entries: int) -> int:
    return 8 + 12 * n_entries


@dataclass(slots=True)
class DsdvEntry:
    dest: int
    next_hop: int
    metric: float
    seq: int
    installed_at: float
    settling_until: float = 0.0
    adv_metric: float = INF  # what this node currently advertises for dest
    adv_seq: int = -1
    changed: bool = False  # since the last full dump
    pending: bool = False  # awaiting a triggered update
    held_since: float = -1.0  # first time a newer but longer route was passed over

    @property
    def usable(self) -> bool:
        return self.seq % 2 == 0 and self.metric < INF


@dataclass(frozen=True, slots=True)
class DsdvUpdate:
    origin: int
    entries: tuple  # ((dest, metric, seq), ...)
    kind: str  # "full" | "incremental"


class DsdvAgent(RoutingAgent):
    name = "dsdv"
    ctl_type = DSDV_CTL

    def __init__(self, node, net, params=None):
        super().__init__(node, net, {**DEFAULTS, **(params or {})})
        self.seq = 0
        self.table: dict[int, DsdvEntry] = {}
        self.periods = 0
        self.last_trigger = -INF
        self.trigger_timer = None
        self.updates_sent = 0

    def start(self) -> None:
        first = self.rng.uniform(0.0, self.params["jitter"])
        self.sim.schedule(self.now + first, TIMER, self.node, self.periodic_update)

    def next_hops(self) -> dict[int, int]:
        return {d: e.next_hop for d, e in self.table.items() if e.usable}

    def metric_to(self, dest: int) -> float:
        if dest == self.node:
            return 0
        e = self.table.get(dest)
        return e.metric if e is not None and e.usable else INF

    # Advertisements ---------------------------------------------------------
    def _settle(self, e: DsdvEntry, now: float) -> bool:
        if now >= e.settling_until:
            e.adv_metric, e.adv_seq = e.metric, e.seq
            return True
        return False

    def build_update(self, kind: str, triggered: bool = False) -> DsdvUpdate:
        now = self.now
        entries = [(self.node, 0, self.seq)]
        for dest in sorted(self.table):
            e = self.table[dest]
            settled = self._settle(e, now)
            if kind == "full":
                if e.adv_seq >= 0:
                    entries.append((dest, e.adv_metric, e.adv_seq))
                e.changed = False
                e.pending = False
            elif settled and (e.pending if triggered else e.changed):
                entries.append((dest, e.adv_metric, e.adv_seq))
                e.pending = False
        return DsdvUpdate(self.node, tuple(entries), kind)

    def _broadcast_update(self, u: DsdvUpdate) -> None:
        self.updates_sent += 1
        self.broadcast(self.control(u, update_bytes(len(u.entries))))

    def periodic_update(self) -> None:
        self.seq += 2
        kind = "full" if self.periods % self.params["full_dump_every"] == 0 else "incremental"
        self.periods += 1
        self._broadcast_update(self.build_update(kind))
        nxt = self.params["update_interval"] + self.rng.uniform(0.0, self.params["jitter"])
        self.sim.schedule(self.now + nxt, TIMER, self.node, self.periodic_update)

    def _trigger(self, at: float | None = None) -> None:
        """Ask for a triggered update, no sooner than ``trigger_gap`` after the last one."""
        when = max(self.now if at is None else at, self.last_trigger + self.params["trigger_gap"])
        if self.trigger_timer is not None:
            pending_at = self.sim.fire_time(self.trigger_timer)
            if pending_at is not None and pending_at <= when:
                return
            self.sim.cancel(self.trigger_timer)
        self.trigger_timer = self.sim.schedule(when, TIMER, self.node, self._triggered_update)

    def _triggered_update(self) -> None:
        self.trigger_timer = None
        u = self.build_update("incremental", triggered=True)
        if len(u.entries) > 1:
            self.last_trigger = self.now
            self._broadcast_update(u)
        # Entries still settling get their own trigger when they settle.
        later = [e.settling_until for e in self.table.values() if e.pending and e.settling_until > self.now]
        if later:
            self._trigger(min(later))

    # Table maintenance ------------------------------------------------------
    def _set(self, e: DsdvEntry, next_hop: int, metric: float, seq: int) -> None:
        if seq < e.seq:
            self.net.recorder.violation("dsdv_seq_decrease")
        if seq % 2 == 1 and metric < INF:
            self.net.recorder.violation("dsdv_odd_finite")
        e.next_hop, e.metric, e.seq = next_hop, metric, seq
        e.installed_at = self.now
        e.held_since = -1.0

    def handle_update(self, u: DsdvUpdate, prev: int) -> None:
        now = self.now
        trigger = False
        for dest, m, s in u.entries:
            if dest == self.node:
                if s > self.seq and s % 2 == 1:
                    # Someone declared us unreachable; answer with a fresher even number.
                    self.seq = s + 1
                    trigger = True
                continue
            cand = m + 1 if m < INF else INF
            e = self.table.get(dest)
            if e is None:
                e = DsdvEntry(dest, prev, cand, s, now)
                self.table[dest] = e
                e.adv_metric, e.adv_seq = cand, s
                e.changed = True
                e.pending = cand < INF
                trigger |= e.pending
            elif s > e.seq:
                if cand > e.metric and prev != e.next_hop and e.usable:
                    # Our next hop should relay the same number soon along the shorter path.
                    if e.held_since < 0:
                        e.held_since = now
                    if now - e.held_since < self.params["route_hold"]:
                        continue
                significant = cand != e.metric
                self._set(e, prev, cand, s)
                e.settling_until = 0.0
                self._settle(e, now)
                e.changed = True
                if significant:
                    e.pending = True
                    trigger = True
            elif s == e.seq and cand < e.metric:
                self._set(e, prev, cand, s)
                e.settling_until = now + self.params["settling_time"]
                e.changed = True
                e.pending = True
                self._trigger(e.settling_until)
        if trigger:
            self._trigger()

    def handle_link_break(self, next_hop: int) -> int:
        broken = 0
        for e in self.table.values():
            if e.next_hop == next_hop and e.metric < INF:
                self._set(e, next_hop, INF, e.seq + 1 if e.seq % 2 == 0 else e.seq)
                e.settling_until = 0.0
                self._settle(e, self.now)
                e.changed = True
                e.pending = True
                broken += 1
        if broken:
            self._trigger()
        return broken

    # Data path --------------------------------------------------------------
    def originate(self, pkt: Packet) -> None:
        if pkt.dst == self.node:
            self.deliver(pkt)
            return
        self.forward(pkt)

    def forward(self, pkt: Packet) -> None:
        e = self.table.get(pkt.dst)
        if e is None or not e.usable:
            self.drop(pkt, NO_ROUTE)
            return
        self.forward_data(pkt, e.next_hop)

    def receive(self, pkt: Packet, prev: int, broadcast: bool) -> None:
        if isinstance(pkt.body, DsdvUpdate):
            self.handle_update(pkt.body, prev)
        elif pkt.dst == self.node:
            self.deliver(pkt)
        else:
            self.forward(pkt)

    def link_failed(self, pkt: Packet, next_hop: int) -> None:
        self.drop(pkt, LINK_BREAK)
        self.handle_link_break(next_hop)
