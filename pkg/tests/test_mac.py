import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from manetsim.engine import RngStream, Simulator
from manetsim.mac import Channel, Mac, MacConfig, neighbors
from manetsim.packet import BROADCAST, CBR, Packet


class ScriptedRng:
    """Backoff draws taken from a list, then zeros."""

    def __init__(self, draws):
        self.draws = list(draws)

    def randrange(self, n):
        return self.draws.pop(0) if self.draws else 0


class Bench:
    def __init__(self, points, cfg=None, rngs=None):
        self.cfg = cfg or MacConfig()
        self.sim = Simulator(1)
        self.pos = np.array(points, dtype=float)
        self.channel = Channel(self.sim, lambda t: self.pos, self.cfg, len(points))
        self.rx, self.failed, self.dropped = [], [], []
        self.macs = [Mac(i, self.sim, self.channel, self.cfg, rngs[i] if rngs else RngStream(i, "mac"),
                         self._rx, self._fail, self._drop) for i in range(len(points))]
        self.uid = 0

    def _rx(self, node, pkt, prev, broadcast):
        self.rx.append((self.sim.now, node, pkt.uid, prev, broadcast))

    def _fail(self, node, pkt, next_hop):
        self.failed.append((self.sim.now, node, pkt.uid, next_hop))

    def _drop(self, node, pkt, reason):
        self.dropped.append((node, pkt.uid, reason))

    def send(self, src, dst, payload=512):
        self.uid += 1
        pkt = Packet(self.uid, CBR, src, dst if dst != BROADCAST else -1, payload, self.sim.now)
        frame = self.macs[src].frame_for(pkt, dst)
        self.macs[src].send(frame)
        return frame


def test_neighbors_boundary_inclusive():
    assert neighbors({0: (0, 0), 1: (250, 0)}, 0, 250) == {1}
    assert neighbors({0: (0, 0), 1: (250.1, 0)}, 0, 250) == set()


def test_neighbors_collinear_line():
    pts = {0: (0, 0), 1: (200, 0), 2: (400, 0)}
    assert neighbors(pts, 1, 250) == {0, 2}
    assert neighbors(pts, 0, 250) == {1}
    arr = np.array([pts[i] for i in range(3)], dtype=float)
    assert neighbors(arr, 2, 250) == {1}


def test_airtime_of_a_full_cbr_frame():
    cfg = MacConfig()
    # (512 + 58) bytes * 8 bits / 2 Mbit/s
    assert cfg.airtime(570) == pytest.approx(570 * 8 / 2e6)
    assert cfg.airtime(570) == pytest.approx(2.28e-3)


def test_idle_channel_delivery_timing():
    b = Bench([(0, 0), (100, 0)], MacConfig(pin_backoff=True))
    f = b.send(0, 1)
    assert f.size == 570
    b.sim.run(1.0)
    assert len(b.rx) == 1
    t, node, uid, prev, bc = b.rx[0]
    assert (node, prev, bc) == (1, 0, False)
    assert t == pytest.approx(b.cfg.difs + 2.28e-3)
    assert t == f.tx_end  # reception happens exactly at the end of the transmission
    assert f.tx_end - f.tx_start == pytest.approx(2.28e-3)


def test_queue_capacity_51st_frame_dropped():
    b = Bench([(0, 0), (100, 0)])
    for _ in range(50):
        b.send(0, 1)
    assert b.dropped == []
    b.send(0, 1)
    assert b.dropped == [(0, 51, "IFQ")]
    assert len(b.macs[0].queue) == 50


def test_fifo_order_on_idle_channel():
    b = Bench([(0, 0), (100, 0)])
    for _ in range(6):
        b.send(0, 1)
    b.sim.run(5.0)
    assert [uid for _, _, uid, _, _ in b.rx] == [1, 2, 3, 4, 5, 6]


def test_unreachable_peer_exhausts_retries():
    b = Bench([(0, 0), (600, 0)])
    b.send(0, 1)
    b.sim.run(5.0)
    assert b.rx == []
    assert len(b.failed) == 1 and b.failed[0][1:] == (0, 1, 1)
    assert b.macs[0].tx_count == b.cfg.retry_limit + 1
    assert b.macs[0].dropped["RETRY"] == 1


def test_broadcast_reaches_all_neighbors_without_retry():
    b = Bench([(0, 0), (200, 0), (0, 200), (400, 400)])
    b.send(0, BROADCAST, 24)
    b.sim.run(1.0)
    assert sorted(node for _, node, *_ in b.rx) == [1, 2]
    assert b.macs[0].tx_count == 1


def test_forced_collision_then_recovery():
    # Both outer nodes draw the same first backoff; the second draws differ.
    rngs = [ScriptedRng([4, 0]), ScriptedRng([]), ScriptedRng([4, 6])]
    b = Bench([(0, 0), (200, 0), (400, 0)], MacConfig(), rngs)
    fa = b.send(0, 1)
    fc = b.send(2, 1)
    b.sim.run(1.0)
    assert b.channel.collisions >= 2  # both frames lost at the middle node
    assert fa.retries == 1 and fc.retries == 1
    assert sorted(uid for _, node, uid, _, _ in b.rx if node == 1) == [1, 2]
    assert b.failed == []


def test_same_instant_senders_do_not_sense_each_other():
    rngs = [ScriptedRng([3]), ScriptedRng([]), ScriptedRng([3])]
    b = Bench([(0, 0), (100, 0), (200, 0)], MacConfig(retry_limit=1), rngs)
    b.send(0, BROADCAST, 24)
    b.send(2, BROADCAST, 24)
    b.sim.run(1.0)
    assert not any(node == 1 for _, node, *_ in b.rx)


def test_ideal_channel_has_no_collisions():
    b = Bench([(0, 0), (200, 0), (400, 0)], MacConfig(ideal_channel=True, pin_backoff=True))
    b.send(0, 1)
    b.send(2, 1)
    b.sim.run(1.0)
    assert b.channel.collisions == 0
    assert len(b.rx) == 2


def test_config_validation():
    with pytest.raises(ValueError):
        MacConfig(cw_min=64, cw_max=32)
    with pytest.raises(ValueError):
        MacConfig(range=-1)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 600), st.floats(0, 600)), min_size=2, max_size=6),
       st.lists(st.tuples(st.integers(0, 5), st.integers(-1, 5)), max_size=40),
       st.integers(0, 1000))
def test_mac_conservation_and_causality(points, sends, seed):
    b = Bench(points, rngs=[RngStream(seed, f"mac{i}") for i in range(len(points))])
    n = len(points)
    frames = []
    for src, dst in sends:
        src %= n
        dst = BROADCAST if dst < 0 else dst % n
        if dst == src:
            continue
        frames.append(b.send(src, dst, 100))
    b.sim.run(30.0)
    for m in b.macs:
        assert m.enqueued == m.delivered + m.dropped["RETRY"] + len(m.queue)
        assert not m.queue
    for f in frames:
        assert f.retries <= b.cfg.retry_limit + 1
    ends = {f.packet.uid: f.tx_end for f in frames}
    for t, node, uid, prev, bc in b.rx:
        assert t == ends[uid]
    assert sum(m.tx_count for m in b.macs) <= (b.cfg.retry_limit + 1) * len(frames)
