"""Wires mobility, radio, routing agents and CBR sources into one simulation."""

from __future__ import annotations

from .engine import TIMER, TRAFFIC_EMIT, Simulator
from .mac import Channel, Mac, MacConfig
from .metrics import DROP, SEND, Recorder
from .mobility import MobilityScenario, PositionTracker
from .protocols import AGENTS
from .traffic import CbrSource, Flow


class Network:
    def __init__(self, sim: Simulator, mobility: MobilityScenario, protocol: str, flows: list[Flow],
                 duration: float, mac_cfg: MacConfig | None = None, protocol_params: dict | None = None,
                 recorder: Recorder | None = None, check_interval: float | None = 2.0):
        if protocol not in AGENTS:
            raise ValueError(f"unknown protocol {protocol!r}; expected one of {sorted(AGENTS)}")
        self.sim = sim
        self.mobility = mobility
        self.protocol = protocol
        self.duration = float(duration)
        self.n = mobility.n_nodes
        self.mac_cfg = mac_cfg or MacConfig()
        self.recorder = recorder or Recorder()
        self.check_interval = check_interval
        self._uid = 0
        self.tracker = PositionTracker(mobility)
        self.channel = Channel(sim, self.tracker.positions, self.mac_cfg, self.n)
        self.protocol_rng = sim.substream("protocol")
        mac_rng = sim.substream("mac")
        self.macs = [Mac(i, sim, self.channel, self.mac_cfg, mac_rng, self._on_receive, self._on_link_failure,
                         self._on_drop) for i in range(self.n)]
        agent_cls = AGENTS[protocol]
        self.agents = [agent_cls(i, self, protocol_params) for i in range(self.n)]
        for f in flows:
            if not (0 <= f.src < self.n and 0 <= f.dst < self.n):
                raise ValueError(f"flow {f} references a node outside 0..{self.n - 1}")
        self.sources = [CbrSource(f, self.duration, self.new_uid) for f in flows]
        self.loop_snapshots = 0

    def new_uid(self) -> int:
        self._uid += 1
        return self._uid

    def positions(self):
        return self.tracker.positions(self.sim.now)

    # MAC callbacks ----------------------------------------------------------
    def _on_receive(self, node, pkt, prev, broadcast):
        self.agents[node].receive(pkt, prev, broadcast)

    def _on_link_failure(self, node, pkt, next_hop):
        # Frames still queued for the lost neighbour would fail the same way;
        # hand them back to the routing agent instead of retrying each one.
        stale = self.macs[node].purge(lambda f: f.dst == next_hop)
        agent = self.agents[node]
        agent.link_failed(pkt, next_hop)
        for frame in stale:
            agent.link_failed(frame.packet, next_hop)

    def _on_drop(self, node, pkt, reason):
        self.recorder.record(self.sim.now, DROP, node, pkt, reason)

    # Running ----------------------------------------------------------------
    def start(self) -> None:
        for agent in self.agents:
            agent.start()
        for src in self.sources:
            t = src.next_time()
            if t is not None:
                self.sim.schedule(t, TRAFFIC_EMIT, src.flow.src, self._emit, src)
        if self.check_interval and self.protocol in ("aodv", "dsdv"):
            self.sim.schedule(self.check_interval, TIMER, -1, self._loop_check)

    def _emit(self, src: CbrSource) -> None:
        pkt, nxt = src.emit(self.sim.now)
        self.recorder.record(self.sim.now, SEND, pkt.src, pkt)
        if nxt is not None:
            self.sim.schedule(nxt, TRAFFIC_EMIT, pkt.src, self._emit, src)
        self.agents[pkt.src].originate(pkt)

    def run(self) -> int:
        self.start()
        count = self.sim.run(self.duration)
        if self.check_interval:
            self.check_conservation()
        return count

    # Invariant checks -------------------------------------------------------
    def _loop_check(self) -> None:
        self.check_loops()
        nxt = self.sim.now + self.check_interval
        if nxt <= self.duration:
            self.sim.schedule(nxt, TIMER, -1, self._loop_check)

    def check_loops(self) -> int:
        """Count destinations whose next-hop graph currently contains a cycle."""
        self.loop_snapshots += 1
        tables = [agent.next_hops() for agent in self.agents]
        found = 0
        for dest in range(self.n):
            if has_cycle(tables, dest):
                found += 1
        if found:
            self.recorder.violation("routing_loop", found)
        return found

    def in_flight_cbr(self) -> set[int]:
        uids = set()
        for mac in self.macs:
            for f in mac.queue:
                if f.packet.is_data:
                    uids.add(f.packet.uid)
        for agent in self.agents:
            for p in agent.buffered_packets():
                if p.is_data:
                    uids.add(p.uid)
        return uids

    def check_conservation(self) -> bool:
        rec = self.recorder
        held = self.in_flight_cbr()
        ok = rec.sent == rec.received + rec.dropped + len(held) and held == rec.unfinished()
        if not ok:
            rec.violation("conservation")
        mac_ok = all(m.enqueued == m.delivered + m.dropped["RETRY"] + m.dropped["PURGE"] + len(m.queue) for m in self.macs)
        if not mac_ok:
            rec.violation("frame_conservation")
        return ok and mac_ok


def has_cycle(tables: list[dict[int, int]], dest: int) -> bool:
    """True when following next hops toward ``dest`` revisits a node."""
    n = len(tables)
    done = [False] * n
    for start in range(n):
        if done[start] or start == dest:
            continue
        path = []
        on_path = set()
        node = start
        while True:
            if node == dest or done[node]:
                break
            if node in on_path:
                return True
            on_path.add(node)
            path.append(node)
            nxt = tables[node].get(dest)
            if nxt is None or not 0 <= nxt < n:
                break
            node = nxt
        for v in path:
            done[v] = True
    return False
