import math

import pytest
from hypothesis import given, settings, strategies as st

from manetsim.engine import RngStream
from manetsim.traffic import CbrSource, Flow, flows_from_json, flows_to_json, generate_connections


def test_ten_nodes_eight_connections():
    flows = generate_connections(10, 8, 4.0, RngStream(1, "traffic"))
    assert len(flows) == 8
    assert len({(f.src, f.dst) for f in flows}) == 8
    assert all(f.rate == 4.0 and f.payload == 512 and f.src != f.dst for f in flows)
    assert all(0.0 <= f.start_at <= 10.0 for f in flows)


def test_zero_connections():
    assert generate_connections(10, 0, 4.0, RngStream(1, "traffic")) == []


def test_too_few_nodes():
    with pytest.raises(ValueError):
        generate_connections(1, 3, 4.0, RngStream(1, "traffic"))


def test_generation_deterministic():
    a = generate_connections(30, 25, 4.0, RngStream(9, "traffic"))
    assert a == generate_connections(30, 25, 4.0, RngStream(9, "traffic"))


def test_pair_space_exhaustion_stops():
    # Two nodes allow only two ordered pairs.
    flows = generate_connections(2, 5, 4.0, RngStream(3, "traffic"))
    assert sorted((f.src, f.dst) for f in flows) == [(0, 1), (1, 0)]


def test_emission_schedule():
    f = Flow(0, 1, 2.0, 4.0)
    assert list(f.emission_times(3.0)) == [2.0, 2.25, 2.5, 2.75]


def test_full_run_sends_400():
    assert len(list(Flow(0, 1, 0.0).emission_times(100.0))) == 400


def test_source_emits_unique_uids():
    counter = iter(range(1, 10**6))
    srcs = [CbrSource(Flow(0, 1, 0.0), 2.0, lambda: next(counter)), CbrSource(Flow(1, 0, 0.1), 2.0, lambda: next(counter))]
    uids = []
    for s in srcs:
        t = s.next_time()
        while t is not None:
            pkt, t = s.emit(t)
            assert pkt.size == 512 and pkt.created == pytest.approx(pkt.created)
            uids.append(pkt.uid)
    assert len(uids) == len(set(uids)) == 16
    with pytest.raises(ValueError):
        CbrSource(Flow(0, 1, 5.0), 10.0, lambda: 1).emit(1.0)


def test_invalid_flow():
    with pytest.raises(ValueError):
        Flow(2, 2, 0.0)
    with pytest.raises(ValueError):
        Flow(0, 1, 0.0, rate=0)


def test_json_round_trip():
    flows = generate_connections(10, 8, 4.0, RngStream(2, "traffic"))
    assert flows_from_json(flows_to_json(flows)) == flows


@settings(max_examples=50, deadline=None)
@given(start=st.floats(0, 10), rate=st.sampled_from([1.0, 2.0, 4.0, 8.0]), duration=st.floats(10, 200))
def test_sent_count_formula(start, rate, duration):
    n = len(list(Flow(0, 1, start, rate).emission_times(duration)))
    assert abs(n - math.floor((duration - start) * rate)) <= 1


def test_connection_count_is_exact_when_feasible():
    from manetsim.engine import RngStream
    from manetsim.traffic import generate_connections
    for seed in range(30):
        flows = generate_connections(10, 8, 4.0, RngStream(seed, "traffic"))
        assert len(flows) == 8 and len({(f.src, f.dst) for f in flows}) == 8
    # 3 nodes have only 6 ordered pairs
    flows = generate_connections(3, 40, 4.0, RngStream(1, "traffic"))
    assert sorted((f.src, f.dst) for f in flows) == [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]
