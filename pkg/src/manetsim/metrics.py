"""Trace recording and the delivery metrics computed from it.

Trace file format (one record per line, header first)::

    time,kind,node,pkt_uid,pkt_type,src,dst,size,hops,reason

Times are written with 6 decimals. Online counters accumulate the same
6-decimal values in trace order, so a rescan of the written file reproduces
them bit for bit.
"""

from __future__ import annotations

import io
import math
import statistics
from dataclasses import asdict, dataclass, field
from typing import Iterable, NamedTuple

SEND, RECV, FWD, DROP, CTRL = "SEND", "RECV", "FWD", "DROP", "CTRL"
KINDS = (SEND, RECV, FWD, DROP, CTRL)

DROP_REASONS = ("IFQ", "COLLISION", "RETRY", "NO_ROUTE", "TTL", "CORRUPT", "LINK_BREAK")

TRACE_HEADER = "time,kind,node,pkt_uid,pkt_type,src,dst,size,hops,reason"


class TraceRecord(NamedTuple):
    time: float
    kind: str
    node: int
    pkt_uid: int
    pkt_type: str
    src: int
    dst: int
    size: int
    hops: int
    reason: str = ""


def format_record(rec: TraceRecord) -> str:
    return (f"{rec.time:.6f},{rec.kind},{rec.node},{rec.pkt_uid},{rec.pkt_type},"
            f"{rec.src},{rec.dst},{rec.size},{rec.hops},{rec.reason}")


def parse_record(line: str) -> TraceRecord:
    t, kind, node, uid, ptype, src, dst, size, hops, reason = line.rstrip("\n").split(",")
    return TraceRecord(float(t), kind, int(node), int(uid), ptype, int(src), int(dst), int(size), int(hops), reason)


def write_trace(records: Iterable[TraceRecord], fh) -> None:
    fh.write(TRACE_HEADER + "\n")
    for rec in records:
        fh.write(format_record(rec) + "\n")


def trace_text(records: Iterable[TraceRecord]) -> str:
    buf = io.StringIO()
    write_trace(records, buf)
    return buf.getvalue()


def read_trace(fh) -> list[TraceRecord]:
    header = fh.readline().strip()
    if header != TRACE_HEADER:
        raise ValueError(f"not a trace file (header {header!r})")
    return [parse_record(line) for line in fh if line.strip()]


@dataclass
class RunMetrics:
    sent: int = 0
    received: int = 0
    dropped: int = 0
    pdf: float = 0.0
    avg_delay: float | None = None
    throughput: float = 0.0  # kbit/s of delivered payload
    control_packets: int = 0
    in_flight: int = 0
    drops_by_reason: dict = field(default_factory=dict)
    violations: dict = field(default_factory=dict)
    events: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _r6(t: float) -> float:
    return round(t, 6)


class Recorder:
    """Collects trace records and keeps the CBR counters up to date."""

    def __init__(self, keep_records: bool = True):
        self.keep_records = keep_records
        self.records: list[TraceRecord] = []
        self.sent = 0
        self.received = 0
        self.dropped = 0
        self.delay_sum = 0.0
        self.delivered_bytes = 0
        self.control = 0
        self.drops_by_reason: dict[str, int] = {}
        self._send_time: dict[int, float] = {}
        self._finished: set[int] = set()
        self.violations: dict[str, int] = {}

    def violation(self, name: str, count: int = 1) -> None:
        self.violations[name] = self.violations.get(name, 0) + count

    def record(self, time: float, kind: str, node: int, pkt, reason: str = "") -> None:
        t = _r6(time)
        if self.keep_records:
            self.records.append(TraceRecord(t, kind, node, pkt.uid, pkt.ptype, pkt.src, pkt.dst,
                                            pkt.size, pkt.hops, reason))
        if pkt.ptype == "cbr":
            if kind == SEND:
                self.sent += 1
                self._send_time[pkt.uid] = t
            elif kind == RECV:
                if pkt.uid in self._finished:
                    self.violation("duplicate_outcome")
                self._finished.add(pkt.uid)
                self.received += 1
                self.delay_sum += t - self._send_time[pkt.uid]
                self.delivered_bytes += pkt.size
            elif kind == DROP:
                if pkt.uid in self._finished:
                    self.violation("duplicate_outcome")
                self._finished.add(pkt.uid)
                self.dropped += 1
                self.drops_by_reason[reason] = self.drops_by_reason.get(reason, 0) + 1
        elif kind == CTRL:
            self.control += 1

    def unfinished(self) -> set[int]:
        return set(self._send_time) - self._finished

    def metrics(self, duration: float) -> RunMetrics:
        return RunMetrics(
            sent=self.sent,
            received=self.received,
            dropped=self.dropped,
            pdf=self.received / self.sent if self.sent else 0.0,
            avg_delay=self.delay_sum / self.received if self.received else None,
            throughput=self.delivered_bytes * 8 / 1000 / duration,
            control_packets=self.control,
            in_flight=self.sent - self.received - self.dropped,
            drops_by_reason=dict(sorted(self.drops_by_reason.items())),
            violations=dict(sorted(self.violations.items())),
        )


def pdf(trace: Iterable[TraceRecord]) -> float:
    sent = received = 0
    for rec in trace:
        if rec.pkt_type != "cbr":
            continue
        if rec.kind == SEND:
            sent += 1
        elif rec.kind == RECV and rec.node == rec.dst:
            received += 1
    return received / sent if sent else 0.0


def avg_delay(trace: Iterable[TraceRecord]) -> float | None:
    """Mean send-to-receive time of delivered CBR packets; None if nothing arrived."""
    sent_at: dict[int, float] = {}
    total = 0.0
    n = 0
    for rec in trace:
        if rec.pkt_type != "cbr":
            continue
        if rec.kind == SEND:
            sent_at[rec.pkt_uid] = rec.time
        elif rec.kind == RECV and rec.node == rec.dst:
            total += rec.time - sent_at[rec.pkt_uid]
            n += 1
    return total / n if n else None


def throughput(trace: Iterable[TraceRecord], duration: float) -> float:
    """Delivered CBR payload in kbit/s over ``duration`` seconds."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    delivered = sum(rec.size for rec in trace
                    if rec.pkt_type == "cbr" and rec.kind == RECV and rec.node == rec.dst)
    return delivered * 8 / 1000 / duration


def scan_trace_file(path, duration: float) -> dict:
    """Single pass over a written trace: pdf, avg_delay, throughput and counts."""
    sent = received = dropped = control = 0
    delivered_bytes = 0
    delay_sum = 0.0
    sent_at: dict[int, float] = {}
    with open(path) as fh:
        header = fh.readline().strip()
        if header != TRACE_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in fh:
            t, kind, node, uid, ptype, src, dst, size, _hops, _reason = line.rstrip("\n").split(",")
            if ptype != "cbr":
                if kind == CTRL:
                    control += 1
                continue
            if kind == SEND:
                sent += 1
                sent_at[int(uid)] = float(t)
            elif kind == RECV and node == dst:
                received += 1
                delay_sum += float(t) - sent_at[int(uid)]
                delivered_bytes += int(size)
            elif kind == DROP:
                dropped += 1
    return {
        "sent": sent,
        "received": received,
        "dropped": dropped,
        "control_packets": control,
        "pdf": received / sent if sent else 0.0,
        "avg_delay": delay_sum / received if received else None,
        "throughput": delivered_bytes * 8 / 1000 / duration,
    }


METRIC_NAMES = ("pdf", "avg_delay", "throughput")


def aggregate(runs: list[RunMetrics]) -> dict[str, tuple[float | None, float | None]]:
    """Mean and sample standard deviation per metric.

    A single value has standard deviation 0. Runs without deliveries are
    left out of the delay statistics; if none remain the delay is (None, None).
    """
    if not runs:
        raise ValueError("aggregate() needs at least one run")
    out = {}
    for name in METRIC_NAMES:
        values = [getattr(r, name) for r in runs]
        values = [v for v in values if v is not None]
        if not values:
            out[name] = (None, None)
            continue
        mean = math.fsum(values) / len(values)
        std = statistics.stdev(values) if len(values) > 1 else 0.0
        out[name] = (mean, std)
    return out
