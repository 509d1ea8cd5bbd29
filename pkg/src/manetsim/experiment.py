"""The protocol comparison sweep: run the matrix, write per-figure CSVs, check trends."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .metrics import aggregate
from .scenario import PAUSE_TIMES, ScenarioConfig, build_flows, build_mobility, run_scenario

PROTOCOLS = ("aodv", "dsr", "dsdv")
SIZES = ((10, 8), (30, 25), (50, 40))
SEEDS = (1, 2, 3, 4, 5)

# CSV name stem -> RunMetrics attribute
METRICS = {"pdf": "pdf", "delay": "avg_delay", "throughput": "throughput"}
CSV_COLUMNS = ["pause"] + [f"{p}_{s}" for p in PROTOCOLS for s in ("mean", "std")]
RUN_COLUMNS = ["protocol", "n_nodes", "max_conn", "pause", "seed", "sent", "received", "dropped", "pdf",
               "avg_delay", "throughput", "control_packets", "violations", "error"]

PDF_TARGET = 0.90
PDF_WARN = 0.85
ORDER_SHARE = 0.80
THROUGHPUT_GAP = 0.10


@dataclass
class SweepSpec:
    protocols: tuple = PROTOCOLS
    sizes: tuple = SIZES  # (n_nodes, max_conn) pairs
    pauses: tuple = PAUSE_TIMES
    seeds: tuple = SEEDS
    out_dir: str = "sweep_out"
    base: dict = field(default_factory=dict)  # ScenarioConfig overrides shared by every cell
    traces: bool = False

    def __post_init__(self):
        self.protocols = tuple(self.protocols)
        self.sizes = tuple((int(n), int(c)) for n, c in self.sizes)
        self.pauses = tuple(self.pauses)
        self.seeds = tuple(self.seeds)
        bad = set(self.protocols) - set(PROTOCOLS)
        if bad:
            raise ValueError(f"unknown protocols {sorted(bad)}")
        if not (self.protocols and self.sizes and self.pauses and self.seeds):
            raise ValueError("sweep needs at least one protocol, size, pause and seed")
        clash = {"protocol", "n_nodes", "max_conn", "pause", "seed"} & set(self.base)
        if clash:
            raise ValueError(f"base overrides may not set per-cell fields {sorted(clash)}")

    def groups(self) -> list[tuple]:
        """(n_nodes, max_conn, pause, seed) rows; each row shares one scenario across protocols."""
        return [(n, c, pause, seed) for n, c in self.sizes for pause in self.pauses for seed in self.seeds]

    def n_runs(self) -> int:
        return len(self.groups()) * len(self.protocols)

    def config(self, protocol, n, conn, pause, seed) -> ScenarioConfig:
        return ScenarioConfig.from_dict({**self.base, "protocol": protocol, "n_nodes": n, "max_conn": conn,
                                         "pause": pause, "seed": seed})

    def to_dict(self) -> dict:
        return asdict(self)


def trace_name(protocol, n, pause, seed) -> str:
    return f"{protocol}_n{n}_p{_fmt_pause(pause)}_s{seed}.csv"


def _fmt_pause(p) -> str:
    return str(int(p)) if float(p).is_integer() else repr(float(p))


def _run_group(spec: SweepSpec, group: tuple) -> list[dict]:
    n, conn, pause, seed = group
    rows = []
    try:
        probe = spec.config(spec.protocols[0], n, conn, pause, seed).validate()
        mobility = build_mobility(probe)
        flows = build_flows(probe)
    except Exception as exc:  # the whole row fails together
        return [_row(p, group, None, f"{type(exc).__name__}: {exc}") for p in spec.protocols]
    for protocol in spec.protocols:
        cfg = spec.config(protocol, n, conn, pause, seed)
        trace = None
        if spec.traces:
            trace = Path(spec.out_dir) / "traces" / trace_name(protocol, n, pause, seed)
        try:
            result = run_scenario(cfg, trace_path=trace, mobility=mobility, flows=flows)
        except Exception as exc:
            rows.append(_row(protocol, group, None, f"{type(exc).__name__}: {exc}"))
            continue
        rows.append(_row(protocol, group, result.metrics, ""))
    return rows


def _row(protocol, group, metrics, error) -> dict:
    n, conn, pause, seed = group
    row = {"protocol": protocol, "n_nodes": n, "max_conn": conn, "pause": pause, "seed": seed, "error": error}
    if metrics is not None:
        row["metrics"] = metrics
    return row


def _sort_key(row):
    return (PROTOCOLS.index(row["protocol"]), row["n_nodes"], row["pause"], row["seed"])


def run_cells(spec: SweepSpec, jobs: int = 1, progress=None) -> list[dict]:
    """Run every cell and return one row per run, sorted by (protocol, n_nodes, pause, seed)."""
    groups = spec.groups()
    rows = []
    if jobs > 1 and len(groups) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for out in pool.map(_run_group, [spec] * len(groups), groups):
                rows.extend(out)
                if progress:
                    progress(len(rows), spec.n_runs())
    else:
        for g in groups:
            rows.extend(_run_group(spec, g))
            if progress:
                progress(len(rows), spec.n_runs())
    rows.sort(key=_sort_key)
    return rows


def _num(x) -> str:
    return "" if x is None else f"{x:.6f}"


def build_tables(spec: SweepSpec, rows: list[dict]) -> dict:
    """(metric, n_nodes) -> {pause: {protocol: (mean, std)}} over the seeds that completed."""
    runs: dict[tuple, list] = {}
    for row in rows:
        if "metrics" in row:
            runs.setdefault((row["protocol"], row["n_nodes"], row["pause"]), []).append(row["metrics"])
    tables = {}
    for n, _ in spec.sizes:
        for stem, attr in METRICS.items():
            table = tables.setdefault((stem, n), {})
            for pause in spec.pauses:
                cell = table.setdefault(pause, {})
                for p in spec.protocols:
                    got = runs.get((p, n, pause))
                    cell[p] = aggregate(got)[attr] if got else (None, None)
    return tables


def table_csv(table: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for pause in sorted(table):
        line = [_fmt_pause(pause)]
        for p in PROTOCOLS:
            mean, std = table[pause].get(p, (None, None))
            line += [_num(mean), _num(std)]
        w.writerow(line)
    return buf.getvalue()


def runs_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RUN_COLUMNS)
    for row in rows:
        m = row.get("metrics")
        line = [row["protocol"], row["n_nodes"], row["max_conn"], _fmt_pause(row["pause"]), row["seed"]]
        if m is None:
            line += [""] * 8
        else:
            line += [m.sent, m.received, m.dropped, _num(m.pdf), _num(m.avg_delay), _num(m.throughput),
                     m.control_packets, sum(m.violations.values())]
        line.append(row["error"])
        w.writerow(line)
    return buf.getvalue()


def csv_name(stem: str, n: int) -> str:
    return f"{stem}_n{n}.csv"


def sweep(spec: SweepSpec, jobs: int = 1, progress=None) -> dict:
    """Run the matrix and write CSVs plus ``summary.json`` into ``spec.out_dir``.

    Returns the summary dictionary; ``summary["failures"]`` lists cells that raised.
    """
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_cells(spec, jobs, progress)
    tables = build_tables(spec, rows)
    for (stem, n), table in tables.items():
        (out / csv_name(stem, n)).write_text(table_csv(table))
    (out / "runs.csv").write_text(runs_csv(rows))
    violations: dict[str, int] = {}
    for row in rows:
        for name, count in row.get("metrics").violations.items() if "metrics" in row else ():
            violations[name] = violations.get(name, 0) + count
    report = check_trends(tables)
    summary = {
        "spec": spec.to_dict(),
        "runs": len(rows),
        "failures": [{k: row[k] for k in ("protocol", "n_nodes", "pause", "seed", "error")}
                     for row in rows if row["error"]],
        "violations": dict(sorted(violations.items())),
        "trends": [v.to_dict() for v in report],
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


# Trend checks --------------------------------------------------------------

@dataclass
class Verdict:
    name: str
    passed: bool
    detail: str
    warning: bool = False

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        if self.passed and self.warning:
            status = "PASS (warning)"
        return f"{self.name}: {status} - {self.detail}"

    def to_dict(self) -> dict:
        return asdict(self)


def read_table(path) -> dict:
    """Parse one sweep CSV back into {pause: {protocol: (mean, std)}}."""
    table = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        for rec in reader:
            cell = {}
            for p in PROTOCOLS:
                m, s = rec[f"{p}_mean"], rec[f"{p}_std"]
                cell[p] = (float(m) if m else None, float(s) if s else None)
            table[float(rec["pause"])] = cell
    return table


def load_tables(out_dir) -> dict:
    """Every ``<metric>_n<N>.csv`` found in ``out_dir``."""
    tables = {}
    for path in sorted(Path(out_dir).glob("*_n*.csv")):
        stem, _, rest = path.stem.rpartition("_n")
        if stem in METRICS and rest.isdigit():
            tables[(stem, int(rest))] = read_table(path)
    return tables


def _mean(values):
    values = [v for v in values if v is not None]
    return math.fsum(values) / len(values) if values else None


def check_trends(tables: dict) -> list[Verdict]:
    """Evaluate the comparative trends on seed-averaged tables; ordering of rows is irrelevant."""
    sizes = sorted({n for _, n in tables})
    verdicts = []

    def means(stem, n, proto):
        return [cell.get(proto, (None, None))[0] for cell in tables.get((stem, n), {}).values()]

    def complete(stem):
        if not sizes:
            return False
        for n in sizes:
            t = tables.get((stem, n))
            if not t or any(cell.get(p, (None, None))[0] is None for cell in t.values() for p in PROTOCOLS):
                return False
        return True

    # AC1: on-demand protocols deliver most packets at every size.
    if not complete("pdf"):
        verdicts.append(Verdict("AC1", False, "incomplete PDF tables"))
    else:
        parts, ok, warn = [], True, False
        for n in sizes:
            for p in ("aodv", "dsr"):
                v = _mean(means("pdf", n, p))
                parts.append(f"{p}@{n}={v:.3f}")
                if v < PDF_WARN:
                    ok = False
                elif v < PDF_TARGET:
                    warn = True
        verdicts.append(Verdict("AC1", ok, ", ".join(parts), warning=warn))

    # AC2: both beat the proactive protocol in most (size, pause) cells.
    if not complete("pdf"):
        verdicts.append(Verdict("AC2", False, "incomplete PDF tables"))
    else:
        total = wins = 0
        for n in sizes:
            for cell in tables[("pdf", n)].values():
                total += 1
                a, d, v = cell["aodv"][0], cell["dsr"][0], cell["dsdv"][0]
                wins += a > v and d > v
        share = wins / total
        verdicts.append(Verdict("AC2", share >= ORDER_SHARE, f"{wins}/{total} cells ({share:.0%})"))

    # AC3: sweep-mean delay DSDV <= DSR <= AODV.
    if not all(tables.get(("delay", n)) for n in sizes) or not sizes:
        verdicts.append(Verdict("AC3", False, "incomplete delay tables"))
    else:
        d = {p: _mean([m for n in sizes for m in means("delay", n, p)]) for p in PROTOCOLS}
        if any(v is None for v in d.values()):
            verdicts.append(Verdict("AC3", False, "a protocol delivered nothing"))
        else:
            ok = d["dsdv"] <= d["dsr"] <= d["aodv"]
            verdicts.append(Verdict("AC3", ok, "dsdv={dsdv:.4f}s dsr={dsr:.4f}s aodv={aodv:.4f}s".format(**d)))

    # AC4 and AC5 on throughput.
    if not complete("throughput"):
        verdicts.append(Verdict("AC4", False, "incomplete throughput tables"))
        verdicts.append(Verdict("AC5", False, "incomplete throughput tables"))
        return verdicts
    t = {p: _mean([m for n in sizes for m in means("throughput", n, p)]) for p in PROTOCOLS}
    gap = abs(t["aodv"] - t["dsr"]) / max(t["aodv"], t["dsr"]) if max(t["aodv"], t["dsr"]) > 0 else 0.0
    ok = gap <= THROUGHPUT_GAP and t["aodv"] >= t["dsdv"] and t["dsr"] >= t["dsdv"]
    verdicts.append(Verdict("AC4", ok, "aodv={aodv:.2f} dsr={dsr:.2f} dsdv={dsdv:.2f} kbit/s".format(**t)
                            + f", aodv/dsr gap {gap:.1%}"))
    parts, ok = [], len(sizes) >= 2
    for p in PROTOCOLS:
        series = [_mean(means("throughput", n, p)) for n in sizes]
        rising = all(b > a for a, b in zip(series, series[1:]))
        ok = ok and rising
        parts.append(p + " " + " < ".join(f"{v:.1f}" for v in series))
    verdicts.append(Verdict("AC5", ok, "; ".join(parts)))
    return verdicts


def report_ok(verdicts: list[Verdict]) -> bool:
    return all(v.passed for v in verdicts)
