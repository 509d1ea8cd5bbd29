"""Unit-disk radio and a slotted CSMA/CA MAC.

The medium is shared by all nodes. A transmission reaches every node within
``range`` of the sender (positions frozen at the start of the frame) and is
lost at a receiver when any other in-range transmission overlaps it there in
time, or when the receiver itself transmits meanwhile. Unicast frames are
acknowledged implicitly: the sender learns at ``tx_end`` whether the
next hop got the frame, and otherwise backs off with a doubled contention
window until ``retry_limit`` retries are spent, after which the routing agent
is told the link is gone.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .engine import DELIVER_FRAME, TIMER
from .packet import BROADCAST, Frame, Packet

IFQ = "IFQ"
COLLISION = "COLLISION"
RETRY = "RETRY"
PURGE = "PURGE"


@dataclass(frozen=True)
class MacConfig:
    range: float = 250.0
    bitrate: float = 2e6
    slot: float = 20e-6
    sifs: float = 10e-6
    cw_min: int = 32
    cw_max: int = 1024
    retry_limit: int = 7
    ifq_len: int = 50
    header_overhead: int = 58
    ack_bytes: int = 14
    cs_range: float = 550.0
    # Oracle-test switches: a collision-free medium and zero backoff draws.
    ideal_channel: bool = False
    pin_backoff: bool = False

    def __post_init__(self):
        for name in ("range", "bitrate", "slot", "cw_min", "cw_max", "retry_limit", "ifq_len"):
            if getattr(self, name) <= 0:
                raise ValueError(f"MacConfig.{name} must be positive")
        if self.header_overhead < 0:
            raise ValueError("MacConfig.header_overhead must be non-negative")
        if self.cw_min > self.cw_max:
            raise ValueError("cw_min must not exceed cw_max")
        if self.cs_range < self.range:
            raise ValueError("carrier-sense range must cover the receive range")

    @property
    def difs(self) -> float:
        return self.sifs + 2 * self.slot

    def airtime(self, frame_bytes: int) -> float:
        return frame_bytes * 8 / self.bitrate

    @property
    def ack_time(self) -> float:
        return self.sifs + self.airtime(self.ack_bytes)


def neighbors(positions, node: int, range_m: float) -> set[int]:
    """Nodes within ``range_m`` (inclusive) of ``node``, excluding itself.

    ``positions`` is a mapping node -> (x, y) or an (n, 2) array.
    """
    if isinstance(positions, np.ndarray):
        d2 = ((positions - positions[node]) ** 2).sum(axis=1)
        hits = np.nonzero(d2 <= range_m * range_m)[0]
        return {int(i) for i in hits if i != node}
    x0, y0 = positions[node]
    r2 = range_m * range_m
    return {n for n, (x, y) in positions.items()
            if n != node and (x - x0) ** 2 + (y - y0) ** 2 <= r2}


class _Tx:
    __slots__ = ("frame", "sender", "start", "end", "rx_mask", "cs_mask", "overlaps")

    def __init__(self, frame, sender, start, end, rx_mask, cs_mask):
        self.frame = frame
        self.sender = sender
        self.start = start
        self.end = end
        self.rx_mask = rx_mask
        self.cs_mask = cs_mask
        self.overlaps = []


class Channel:
    """Shared wireless medium: who hears whom, and which receptions collide."""

    def __init__(self, sim, position_fn, cfg: MacConfig, n_nodes: int):
        self.sim = sim
        self.position_fn = position_fn
        self.cfg = cfg
        self.n = n_nodes
        self.active: list[_Tx] = []
        self.transmissions = 0
        self.receptions = 0  # (tx, receiver) pairs delivered intact
        self.collisions = 0  # (tx, receiver) pairs lost to overlap
        self._r2 = cfg.range ** 2
        self._cs2 = cfg.cs_range ** 2
        self._cca = 0.5 * cfg.slot
        self._next_end = float("inf")  # earliest end among active transmissions

    def _prune(self, now):
        if now >= self._next_end:
            self.active = [tx for tx in self.active if tx.end > now]
            self._next_end = min((tx.end for tx in self.active), default=float("inf"))

    def start(self, frame: Frame, sender: int, start: float, end: float) -> _Tx:
        pos = self.position_fn(start)
        d2 = ((pos - pos[sender]) ** 2).sum(axis=1)
        rx_mask = d2 <= self._r2
        rx_mask[sender] = False
        cs_mask = d2 <= self._cs2
        tx = _Tx(frame, sender, start, end, rx_mask, cs_mask)
        if not self.cfg.ideal_channel:
            self._prune(start)
            for other in self.active:
                other.overlaps.append(tx)
                tx.overlaps.append(other)
            self.active.append(tx)
            if end < self._next_end:
                self._next_end = end
        self.transmissions += 1
        return tx

    def busy_until(self, node: int, now: float) -> float:
        """End of the latest transmission ``node`` can sense, or ``now`` if idle."""
        if self.cfg.ideal_channel:
            return now
        self._prune(now)
        until = now
        sensed_before = now - self._cca
        for tx in self.active:
            # A frame becomes detectable only once it has been on air for the CCA delay.
            if tx.end > until and (tx.sender == node or (tx.cs_mask[node] and tx.start <= sensed_before)):
                until = tx.end
        return until

    def finish(self, tx: _Tx) -> np.ndarray:
        """Receivers that got ``tx`` intact, ascending."""
        heard = tx.rx_mask
        if tx.overlaps:
            lost = np.zeros(self.n, dtype=bool)
            for other in tx.overlaps:
                lost |= other.rx_mask
                lost[other.sender] = True
            clean = heard & ~lost
            self.collisions += int((heard & lost).sum())
        else:
            clean = heard
        receivers = np.nonzero(clean)[0]
        self.receptions += len(receivers)
        return receivers


class Mac:
    """Per-node interface queue plus CSMA/CA access and unicast retries."""

    def __init__(self, node: int, sim, channel: Channel, cfg: MacConfig, rng, on_receive, on_link_failure,
                 on_drop=None):
        self.node = node
        self.sim = sim
        self.channel = channel
        self.cfg = cfg
        self.rng = rng
        self.on_receive = on_receive
        self.on_link_failure = on_link_failure
        self.on_drop = on_drop
        self.queue: deque[Frame] = deque()  # head is the frame in service
        self.cw = cfg.cw_min
        self.busy = False  # a head frame is being contended for or sent
        self.tx_count = 0
        self.enqueued = 0
        self.delivered = 0
        self.dropped = {IFQ: 0, RETRY: 0, PURGE: 0}

    def frame_for(self, packet: Packet, next_hop: int) -> Frame:
        return Frame(packet, self.node, next_hop, packet.size + packet.extra + self.cfg.header_overhead)

    def send(self, frame: Frame) -> bool:
        """Queue ``frame``; False (and a recorded IFQ drop) when the queue is full."""
        if len(self.queue) >= self.cfg.ifq_len:
            self.dropped[IFQ] += 1
            if self.on_drop is not None:
                self.on_drop(self.node, frame.packet, IFQ)
            return False
        self.queue.append(frame)
        self.enqueued += 1
        if not self.busy:
            self.busy = True
            self._contend(0.0)
        return True

    def queued_packets(self):
        return [f.packet for f in self.queue]

    def purge(self, predicate) -> list[Frame]:
        """Remove queued frames (never the one in service) matching ``predicate``."""
        if len(self.queue) <= 1:
            return []
        head = self.queue[0]
        kept = deque([head])
        removed = []
        for f in list(self.queue)[1:]:
            (removed if predicate(f) else kept).append(f)
        self.queue = kept
        self.dropped[PURGE] += len(removed)
        return removed

    def _backoff(self) -> float:
        if self.cfg.pin_backoff:
            return 0.0
        return self.rng.randrange(self.cw) * self.cfg.slot

    def _contend(self, extra_wait: float) -> None:
        delay = extra_wait + self.cfg.difs + self._backoff()
        self.sim.schedule(self.sim.now + delay, TIMER, self.node, self._attempt)

    def _attempt(self) -> None:
        now = self.sim.now
        until = self.channel.busy_until(self.node, now)
        if until > now:
            self.sim.schedule(until + self.cfg.difs + self._backoff(), TIMER, self.node, self._attempt)
            return
        frame = self.queue[0]
        airtime = self.cfg.airtime(frame.size)
        frame.tx_start = now
        frame.tx_end = now + airtime
        tx = self.channel.start(frame, self.node, now, frame.tx_end)
        self.tx_count += 1
        self.sim.schedule(frame.tx_end, DELIVER_FRAME, self.node, self._tx_done, tx)

    def _tx_done(self, tx: _Tx) -> None:
        frame = tx.frame
        receivers = self.channel.finish(tx)
        if frame.dst == BROADCAST:
            self._complete()
            for r in receivers:
                self.on_receive(int(r), frame.packet, self.node, True)
            return
        if frame.dst in receivers:
            self._complete(self.cfg.ack_time)
            frame.packet.hops += 1
            self.on_receive(frame.dst, frame.packet, self.node, False)
            return
        frame.retries += 1
        if frame.retries > self.cfg.retry_limit:
            self.dropped[RETRY] += 1
            self._complete(self.cfg.ack_time, success=False)
            self.on_link_failure(self.node, frame.packet, frame.dst)
            return
        self.cw = min(2 * self.cw, self.cfg.cw_max)
        self._contend(self.cfg.ack_time)

    def _complete(self, wait: float = 0.0, success: bool = True) -> None:
        self.queue.popleft()
        if success:
            self.delivered += 1
        self.cw = self.cfg.cw_min
        if self.queue:
            self._contend(wait)
        else:
            self.busy = False
