import json
import subprocess
import sys

import pytest

from manetsim import experiment
from manetsim.cli import main
from manetsim.experiment import PROTOCOLS, SweepSpec, Verdict, check_trends, load_tables, table_csv


def test_generate_mobility_and_reuse(tmp_path, capsys):
    assert main(["generate-mobility", "--nodes", "10", "--pause", "20", "--seed", "4", "--out", str(tmp_path)]) == 0
    path = tmp_path / "mobility_n10_p20_s4.ns2"
    assert path.exists() and "$node_(9)" in path.read_text()
    assert main(["generate-traffic", "--nodes", "10", "--seed", "4", "--out", str(tmp_path)]) == 0
    traffic = tmp_path / "traffic_n10_c8_s4.json"
    assert len(json.loads(traffic.read_text())) <= 8
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"duration": 20.0}))
    capsys.readouterr()
    rc = main(["run", "--config", str(cfg), "--protocol", "dsr", "--nodes", "10", "--pause", "20", "--seed", "4",
               "--mobility", str(path), "--traffic", str(traffic), "--out", str(tmp_path)])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    metrics = json.loads((tmp_path / "dsr_n10_p20_s4.metrics.json").read_text())
    assert summary["sent"] == metrics["sent"] and metrics["violations"] == {}
    assert (tmp_path / "dsr_n10_p20_s4.trace.csv").exists()


def test_run_matches_generated_inputs(tmp_path):
    # Generating files first and then running from them gives the same trace as generating in place.
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"duration": 15.0}))
    args = ["--config", str(cfg), "--nodes", "10", "--seed", "2", "--out"]
    main(["generate-mobility", *args, str(tmp_path)])
    main(["generate-traffic", *args, str(tmp_path)])
    main(["run", *args, str(tmp_path / "a")])
    main(["run", "--mobility", str(tmp_path / "mobility_n10_p0_s2.ns2"),
          "--traffic", str(tmp_path / "traffic_n10_c8_s2.json"), *args, str(tmp_path / "b")])
    name = "aodv_n10_p0_s2.trace.csv"
    assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.mark.parametrize("argv", [
    ["run", "--seed", "-1"],
    ["run", "--nodes", "-3"],
    ["run", "--config", "/nonexistent.json"],
    ["generate-traffic", "--pause", "-5"],
    ["sweep", "--jobs", "0", "--seeds", "1"],
])
def test_bad_input_exits_2(argv, tmp_path, capsys):
    assert main(argv + ["--out", str(tmp_path)]) == 2
    assert "error:" in capsys.readouterr().err


def test_malformed_config_exits_2(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{not json")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    cfg.write_text(json.dumps({"speed": 3}))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_unknown_protocol_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--protocol", "olsr"])
    assert exc.value.code == 2


def test_small_sweep_then_check(tmp_path, capsys):
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps({"sizes": [[10, 8], [30, 25]], "pauses": [0, 100], "base": {"duration": 20.0}}))
    out = tmp_path / "out"
    rc = main(["sweep", "--config", str(cfg), "--seeds", "1", "--jobs", "2", "--out", str(out)])
    text = capsys.readouterr().out
    assert rc == 0, text
    for stem in ("pdf", "delay", "throughput"):
        for n in (10, 30):
            assert (out / f"{stem}_n{n}.csv").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["runs"] == 12 and summary["failures"] == [] and summary["violations"] == {}
    assert [line.split(":")[0] for line in text.splitlines() if line.startswith("AC")] == \
        ["AC1", "AC2", "AC3", "AC4", "AC5"]
    rc = main(["check", "--out", str(out)])
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 5
    assert rc == (0 if all("FAIL" not in line for line in lines) else 1)


def test_sweep_jobs_do_not_change_results(tmp_path):
    base = dict(sizes=[(10, 8)], pauses=[0, 50], seeds=[1, 2], base={"duration": 15.0})
    one = experiment.sweep(SweepSpec(out_dir=str(tmp_path / "a"), **base), jobs=1)
    two = experiment.sweep(SweepSpec(out_dir=str(tmp_path / "b"), **base), jobs=2)
    for name in ("pdf_n10.csv", "delay_n10.csv", "throughput_n10.csv", "runs.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert one["trends"] == two["trends"]


def test_check_on_empty_dir_fails(tmp_path):
    assert main(["check", "--out", str(tmp_path)]) == 1


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "manetsim", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("generate-mobility", "generate-traffic", "run", "sweep", "check"):
        assert cmd in out.stdout


# Trend checks on synthetic tables ------------------------------------------

def _tables(pdf, delay, thr, sizes=(10, 30, 50), pauses=(0, 20, 40, 60, 80, 100)):
    """Build tables from per-protocol values; ``thr`` values are scaled by node count."""
    tables = {}
    for n in sizes:
        for stem, vals, scale in (("pdf", pdf, 1), ("delay", delay, 1), ("throughput", thr, n)):
            tables[(stem, n)] = {float(p): {proto: (vals[proto] * scale, 0.0) for proto in PROTOCOLS}
                                 for p in pauses}
    return tables


GOOD = dict(pdf={"aodv": 0.95, "dsr": 0.96, "dsdv": 0.8}, delay={"aodv": 0.05, "dsr": 0.03, "dsdv": 0.01},
            thr={"aodv": 10.0, "dsr": 10.5, "dsdv": 8.0})


def _names(verdicts):
    return {v.name: v for v in verdicts}


def test_trends_pass_on_good_tables():
    v = _names(check_trends(_tables(**GOOD)))
    assert all(x.passed and not x.warning for x in v.values()), [x.line() for x in v.values()]


def test_low_pdf_warns_or_fails():
    pdf = dict(GOOD["pdf"], aodv=0.87)
    v = _names(check_trends(_tables(pdf, GOOD["delay"], GOOD["thr"])))["AC1"]
    assert v.passed and v.warning and "warning" in v.line()
    pdf = dict(GOOD["pdf"], dsr=0.84)
    assert not _names(check_trends(_tables(pdf, GOOD["delay"], GOOD["thr"])))["AC1"].passed


def test_dsdv_winning_fails_ordering():
    pdf = dict(GOOD["pdf"], dsdv=0.99)
    assert not _names(check_trends(_tables(pdf, GOOD["delay"], GOOD["thr"])))["AC2"].passed


def test_delay_order_and_throughput_gap():
    delay = dict(GOOD["delay"], dsr=0.06)
    assert not _names(check_trends(_tables(GOOD["pdf"], delay, GOOD["thr"])))["AC3"].passed
    thr = dict(GOOD["thr"], dsr=12.0)
    assert not _names(check_trends(_tables(GOOD["pdf"], GOOD["delay"], thr)))["AC4"].passed


def test_zeroed_dsdv_still_evaluated():
    pdf = dict(GOOD["pdf"], dsdv=0.0)
    thr = dict(GOOD["thr"], dsdv=0.0)
    v = _names(check_trends(_tables(pdf, GOOD["delay"], thr)))
    assert v["AC2"].passed and v["AC4"].passed
    # AC5 needs a strictly rising series for every protocol
    assert not v["AC5"].passed


def test_flat_throughput_fails_ac5():
    tables = _tables(**GOOD)
    for n in (30, 50):
        tables[("throughput", n)] = tables[("throughput", 10)]
    assert not _names(check_trends(tables))["AC5"].passed


def test_row_order_irrelevant():
    tables = _tables(**GOOD)
    shuffled = {k: dict(reversed(list(v.items()))) for k, v in reversed(list(tables.items()))}
    assert check_trends(shuffled) == check_trends(tables)


def test_missing_cells_are_incomplete():
    tables = _tables(**GOOD)
    tables[("pdf", 30)][0.0]["dsr"] = (None, None)
    del tables[("throughput", 50)]
    v = _names(check_trends(tables))
    assert not v["AC1"].passed and "incomplete" in v["AC1"].detail
    assert not v["AC4"].passed and not v["AC5"].passed


def test_csv_round_trip(tmp_path):
    tables = _tables(**GOOD)
    for (stem, n), t in tables.items():
        (tmp_path / experiment.csv_name(stem, n)).write_text(table_csv(t))
    assert load_tables(tmp_path) == tables
    header = (tmp_path / "pdf_n10.csv").read_text().splitlines()[0]
    assert header == "pause,aodv_mean,aodv_std,dsr_mean,dsr_std,dsdv_mean,dsdv_std"


def test_verdict_line_format():
    assert Verdict("AC9", True, "ok").line() == "AC9: PASS - ok"
    assert Verdict("AC1", True, "x", warning=True).line() == "AC1: PASS (warning) - x"
    assert Verdict("AC2", False, "y").line() == "AC2: FAIL - y"


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(protocols=["olsr"])
    with pytest.raises(ValueError):
        SweepSpec(seeds=[])
    with pytest.raises(ValueError):
        SweepSpec(base={"seed": 3})
    assert SweepSpec().n_runs() == 270
