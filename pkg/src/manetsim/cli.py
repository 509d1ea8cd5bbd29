"""Command line entry point: scenario generation, single runs, the sweep and its trend check."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import experiment
from .mobility import export_ns2
from .scenario import ConfigError, ScenarioConfig, build_flows, build_mobility, run_scenario
from .traffic import flows_from_json, flows_to_json


def _add_common(p, *, scenario=True):
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--seed", type=int, help="master seed (non-negative integer)")
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    if scenario:
        p.add_argument("--protocol", choices=experiment.PROTOCOLS)
        p.add_argument("--nodes", type=int, help="number of nodes")
        p.add_argument("--pause", type=float, help="maximum pause time in seconds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="manetsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-mobility", help="write a Manhattan grid movement file in ns-2 format")
    _add_common(p)
    p = sub.add_parser("generate-traffic", help="write a random CBR connection list (JSON)")
    _add_common(p)
    p.add_argument("--connections", type=int, help="maximum number of connections")

    p = sub.add_parser("run", help="simulate one scenario and write its trace and metrics")
    _add_common(p)
    p.add_argument("--mobility", help="ns-2 movement file to use instead of generating one")
    p.add_argument("--traffic", help="connection list (JSON) to use instead of generating one")

    p = sub.add_parser("sweep", help="run the protocol comparison matrix and write CSVs")
    _add_common(p)
    p.add_argument("--seeds", help="comma-separated seed list (default 1,2,3,4,5)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--traces", action="store_true", help="also keep one trace file per run")

    p = sub.add_parser("check", help="evaluate trend criteria on a sweep output directory")
    p.add_argument("--out", default=".", help="sweep output directory")
    p.add_argument("--config", help="unused; accepted for symmetry")
    return parser


def _scenario(args) -> ScenarioConfig:
    data = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
    for flag, key in (("protocol", "protocol"), ("nodes", "n_nodes"), ("pause", "pause"), ("seed", "seed")):
        value = getattr(args, flag, None)
        if value is not None:
            data[key] = value
    if getattr(args, "connections", None) is not None:
        data["max_conn"] = args.connections
    return ScenarioConfig.from_dict(data).validate()


def _check_seed(seed):
    if seed is not None and seed < 0:
        raise ConfigError("--seed must be non-negative")


def cmd_generate_mobility(args) -> int:
    cfg = _scenario(args)
    scenario = build_mobility(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"mobility_n{cfg.n_nodes}_p{experiment._fmt_pause(cfg.pause)}_s{cfg.seed}.ns2"
    path.write_text(export_ns2(scenario))
    print(path)
    return 0


def cmd_generate_traffic(args) -> int:
    cfg = _scenario(args)
    flows = build_flows(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"traffic_n{cfg.n_nodes}_c{cfg.connections}_s{cfg.seed}.json"
    path.write_text(flows_to_json(flows) + "\n")
    print(path)
    return 0


def cmd_run(args) -> int:
    cfg = _scenario(args)
    if args.mobility:
        cfg.mobility_file = args.mobility
    flows = None
    if args.traffic:
        flows = flows_from_json(Path(args.traffic).read_text())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{cfg.protocol}_n{cfg.n_nodes}_p{experiment._fmt_pause(cfg.pause)}_s{cfg.seed}"
    result = run_scenario(cfg, trace_path=out / f"{stem}.trace.csv", flows=flows)
    metrics = result.metrics.to_dict()
    (out / f"{stem}.metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    print(json.dumps({k: metrics[k] for k in ("sent", "received", "pdf", "avg_delay", "throughput")}))
    if metrics["violations"]:
        print(f"invariant violations: {metrics['violations']}", file=sys.stderr)
        return 1
    return 0


def _sweep_spec(args) -> experiment.SweepSpec:
    data = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
    if args.protocol:
        data["protocols"] = [args.protocol]
    if args.nodes is not None:
        sizes = [tuple(s) for s in data.get("sizes", experiment.SIZES)]
        picked = [s for s in sizes if s[0] == args.nodes]
        data["sizes"] = picked or [(args.nodes, experiment.ScenarioConfig(n_nodes=args.nodes).connections)]
    if args.pause is not None:
        data["pauses"] = [args.pause]
    if args.seeds:
        data["seeds"] = [int(s) for s in args.seeds.split(",") if s.strip()]
    if args.seed is not None:
        data["seeds"] = [args.seed]
    if args.traces:
        data["traces"] = True
    data["out_dir"] = args.out
    try:
        return experiment.SweepSpec(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_sweep(args) -> int:
    spec = _sweep_spec(args)
    if args.jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    started = time.perf_counter()

    def progress(done, total):
        print(f"\r{done}/{total} runs", end="", file=sys.stderr, flush=True)

    summary = experiment.sweep(spec, jobs=args.jobs, progress=progress)
    print(f"\nfinished {summary['runs']} runs in {time.perf_counter() - started:.0f} s", file=sys.stderr)
    for v in summary["trends"]:
        print(experiment.Verdict(**v).line())
    if summary["violations"]:
        print(f"invariant violations: {summary['violations']}")
    for f in summary["failures"]:
        print(f"FAILED cell {f['protocol']} n={f['n_nodes']} pause={f['pause']} seed={f['seed']}: {f['error']}")
    return 1 if summary["failures"] or summary["violations"] else 0


def cmd_check(args) -> int:
    tables = experiment.load_tables(args.out)
    if not tables:
        print(f"no sweep CSVs found in {args.out}", file=sys.stderr)
        return 1
    verdicts = experiment.check_trends(tables)
    for v in verdicts:
        print(v.line())
    return 0 if experiment.report_ok(verdicts) else 1


COMMANDS = {
    "generate-mobility": cmd_generate_mobility,
    "generate-traffic": cmd_generate_traffic,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "check": cmd_check,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _check_seed(getattr(args, "seed", None))
        return COMMANDS[args.command](args)
    except (ConfigError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
