import io
import statistics

import pytest
from hypothesis import given, settings, strategies as st

from manetsim.metrics import (DROP, RECV, SEND, Recorder, RunMetrics, TraceRecord, aggregate, avg_delay, pdf,
                              read_trace, scan_trace_file, throughput, trace_text)
from manetsim.packet import CBR, Packet


def cbr_trace(sent, received, delay=0.01, payload=512):
    recs = []
    for uid in range(sent):
        recs.append(TraceRecord(uid * 0.25, SEND, 0, uid, CBR, 0, 1, payload, 0))
    for uid in range(received):
        recs.append(TraceRecord(uid * 0.25 + delay, RECV, 1, uid, CBR, 0, 1, payload, 1))
    recs.sort(key=lambda r: r.time)
    return recs


def line_scan_counts(text):
    """Oracle: count SEND and destination RECV lines by plain string matching."""
    sent = received = 0
    for line in text.splitlines()[1:]:
        f = line.split(",")
        if f[4] == "cbr" and f[1] == "SEND":
            sent += 1
        if f[4] == "cbr" and f[1] == "RECV" and f[2] == f[6]:
            received += 1
    return sent, received


def test_pdf_examples():
    assert pdf(cbr_trace(10, 10)) == 1.0
    assert pdf([]) == 0.0
    trace = cbr_trace(400, 372)
    s, r = line_scan_counts(trace_text(trace))
    assert (s, r) == (400, 372)
    assert pdf(trace) == pytest.approx(r / s) == pytest.approx(0.93)


def test_delay_examples():
    one = [TraceRecord(1.0, SEND, 0, 1, CBR, 0, 1, 512, 0), TraceRecord(1.05, RECV, 1, 1, CBR, 0, 1, 512, 1)]
    assert avg_delay(one) == pytest.approx(0.05)
    two = one[:1] + [TraceRecord(2.0, SEND, 0, 2, CBR, 0, 1, 512, 0), TraceRecord(1.01, RECV, 1, 1, CBR, 0, 1, 512, 1),
                     TraceRecord(2.03, RECV, 1, 2, CBR, 0, 1, 512, 1)]
    assert avg_delay(two) == pytest.approx(0.02)
    assert avg_delay(cbr_trace(3, 0)) is None


def test_throughput_examples():
    assert throughput(cbr_trace(400, 400), 100.0) == pytest.approx(400 * 512 * 8 / 1000 / 100)
    assert throughput(cbr_trace(400, 400), 100.0) == pytest.approx(16.384)
    assert throughput(cbr_trace(5, 0), 100.0) == 0.0
    assert throughput(cbr_trace(800, 800), 100.0) == pytest.approx(2 * 16.384)
    with pytest.raises(ValueError):
        throughput([], 0)


def test_control_and_forward_records_do_not_count():
    recs = cbr_trace(4, 2) + [TraceRecord(0.5, RECV, 2, 99, "aodv-ctl", 0, 2, 24, 1),
                              TraceRecord(0.6, RECV, 2, 3, CBR, 0, 1, 512, 1)]  # not at the destination
    assert pdf(recs) == 0.5


def test_aggregate_examples():
    runs = [RunMetrics(pdf=0.9, avg_delay=0.1, throughput=10.0), RunMetrics(pdf=1.0, avg_delay=None, throughput=20.0)]
    agg = aggregate(runs)
    assert agg["pdf"][0] == pytest.approx(0.95)
    assert agg["pdf"][1] == pytest.approx(statistics.stdev([0.9, 1.0])) == pytest.approx(0.0707, abs=1e-4)
    assert agg["avg_delay"] == (0.1, 0.0)
    assert aggregate(runs[:1])["throughput"] == (10.0, 0.0)
    assert aggregate([RunMetrics(avg_delay=None)])["avg_delay"] == (None, None)
    with pytest.raises(ValueError):
        aggregate([])


def test_trace_round_trip_and_format():
    recs = cbr_trace(3, 2) + [TraceRecord(5.0, DROP, 0, 2, CBR, 0, 1, 512, 0, "NO_ROUTE")]
    text = trace_text(recs)
    lines = text.splitlines()
    assert lines[0] == "time,kind,node,pkt_uid,pkt_type,src,dst,size,hops,reason"
    assert lines[1] == "0.000000,SEND,0,0,cbr,0,1,512,0,"
    assert lines[-1].endswith(",NO_ROUTE")
    assert read_trace(io.StringIO(text)) == recs
    with pytest.raises(ValueError):
        read_trace(io.StringIO("bogus\n"))


def test_recorder_matches_file_scan(tmp_path):
    rec = Recorder()
    pkts = [Packet(i, CBR, 0, 1, 512, 0.0) for i in range(5)]
    for i, p in enumerate(pkts):
        rec.record(i * 0.1234567, SEND, 0, p)
    rec.record(0.9, RECV, 1, pkts[0])
    rec.record(1.3333333, RECV, 1, pkts[1])
    rec.record(1.5, DROP, 2, pkts[2], "IFQ")
    m = rec.metrics(10.0)
    path = tmp_path / "t.csv"
    path.write_text(trace_text(rec.records))
    scan = scan_trace_file(path, 10.0)
    assert (scan["sent"], scan["received"], scan["dropped"]) == (5, 2, 1)
    assert scan["pdf"] == m.pdf and scan["avg_delay"] == m.avg_delay and scan["throughput"] == m.throughput
    assert m.in_flight == 2 and rec.unfinished() == {3, 4}
    assert m.drops_by_reason == {"IFQ": 1}


def test_duplicate_outcome_flagged():
    rec = Recorder()
    p = Packet(1, CBR, 0, 1, 512, 0.0)
    rec.record(0, SEND, 0, p)
    rec.record(1, RECV, 1, p)
    rec.record(2, DROP, 1, p, "TTL")
    assert rec.violations == {"duplicate_outcome": 1}


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 50), st.one_of(st.none(), st.floats(0.0005, 3.0))), min_size=1, max_size=60))
def test_online_counters_equal_rescan(packets):
    rec = Recorder()
    events = []
    for uid, (t, d) in enumerate(packets):
        p = Packet(uid, CBR, 0, 1, 512, t)
        events.append((t, 0, SEND, p))
        if d is not None:
            events.append((t + d, 1, RECV, p))
    events.sort(key=lambda e: (round(e[0], 6), e[1]))
    for t, _, kind, p in events:
        rec.record(t, kind, 1 if kind == RECV else 0, p)
    m = rec.metrics(50.0)
    assert m.pdf == pdf(rec.records)
    assert m.avg_delay == avg_delay(rec.records)
    assert m.throughput == throughput(rec.records, 50.0)
    assert 0.0 <= m.pdf <= 1.0
