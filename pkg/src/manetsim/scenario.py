"""Scenario configuration and single-run execution."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .engine import RngStream, Simulator
from .mac import MacConfig
from .metrics import Recorder, RunMetrics, write_trace
from .mobility import GridSpec, MobilityScenario, generate_manhattan, import_ns2
from .protocols import AGENTS
from .traffic import Flow, generate_connections

# Node count -> number of CBR connections used together in the experiments.
CONNECTIONS_FOR_SIZE = {10: 8, 30: 25, 50: 40}
PAUSE_TIMES = (0, 20, 40, 60, 80, 100)


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    protocol: str = "aodv"
    n_nodes: int = 10
    max_conn: int | None = None  # None: paired with n_nodes (8/25/40), else 8
    pause: float = 0.0
    v_min: float = 5.0
    v_max: float = 20.0
    width: float = 500.0
    height: float = 500.0
    duration: float = 100.0
    seed: int = 1
    rate: float = 4.0
    payload: int = 512
    range: float = 250.0
    grid_u: int = 6
    grid_v: int = 6
    p_straight: float = 0.5
    p_left: float = 0.25
    p_right: float = 0.25
    p_pause: float = 0.5
    start_window: float = 10.0
    mac: dict = field(default_factory=dict)
    protocol_params: dict = field(default_factory=dict)
    flows: list | None = None  # explicit flow list instead of random generation
    mobility_file: str | None = None  # ns-2 movement script instead of generation

    @property
    def connections(self) -> int:
        if self.max_conn is not None:
            return self.max_conn
        return CONNECTIONS_FOR_SIZE.get(self.n_nodes, 8)

    def validate(self) -> ScenarioConfig:
        if self.protocol not in AGENTS:
            raise ConfigError(f"protocol must be one of {sorted(AGENTS)}, got {self.protocol!r}")
        if self.n_nodes < 0:
            raise ConfigError("n_nodes must be non-negative")
        if self.connections < 0:
            raise ConfigError("max_conn must be non-negative")
        if self.connections > 0 and self.n_nodes < 2 and self.flows is None:
            raise ConfigError("CBR connections need at least two nodes")
        if self.v_min <= 0 or self.v_min > self.v_max:
            raise ConfigError("need 0 < v_min <= v_max")
        if self.pause < 0:
            raise ConfigError("pause must be non-negative")
        if self.duration <= 0 or self.width <= 0 or self.height <= 0:
            raise ConfigError("duration and area must be positive")
        if self.rate <= 0 or self.payload <= 0:
            raise ConfigError("rate and payload must be positive")
        known = {f.name for f in fields(MacConfig)}
        unknown = set(self.mac) - known
        if unknown:
            raise ConfigError(f"unknown MAC parameters: {sorted(unknown)}")
        try:
            self.mac_config()
            GridSpec(self.width, self.height, self.grid_u, self.grid_v)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def mac_config(self) -> MacConfig:
        return MacConfig(**{"range": self.range, **self.mac})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> ScenarioConfig:
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> ScenarioConfig:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def build_mobility(cfg: ScenarioConfig) -> MobilityScenario:
    grid = GridSpec(cfg.width, cfg.height, cfg.grid_u, cfg.grid_v)
    if cfg.mobility_file:
        with open(cfg.mobility_file) as fh:
            return import_ns2(fh.read(), duration=cfg.duration, grid=grid)
    rng = RngStream(cfg.seed, "mobility")
    return generate_manhattan(grid, cfg.n_nodes, cfg.v_min, cfg.v_max, cfg.pause, cfg.duration, rng,
                              cfg.p_straight, cfg.p_left, cfg.p_right, cfg.p_pause)


def build_flows(cfg: ScenarioConfig) -> list[Flow]:
    if cfg.flows is not None:
        return [f if isinstance(f, Flow) else Flow(**f) for f in cfg.flows]
    rng = RngStream(cfg.seed, "traffic")
    return generate_connections(cfg.n_nodes, cfg.connections, cfg.rate, rng, cfg.payload, cfg.start_window)


@dataclass
class RunResult:
    config: ScenarioConfig
    metrics: RunMetrics
    records: list | None = None
    trace_path: str | None = None
    network: object = field(default=None, repr=False)


def run_scenario(cfg: ScenarioConfig, trace_path: str | os.PathLike | None = None, keep_records: bool | None = None,
                 mobility: MobilityScenario | None = None, flows: list[Flow] | None = None,
                 check_interval: float | None = 2.0) -> RunResult:
    """Simulate one scenario; optionally write its trace file.

    ``mobility`` and ``flows`` may be passed in to share them between
    protocols; otherwise they are built from the configuration and seed.
    """
    from .network import Network

    cfg.validate()
    if keep_records is None:
        keep_records = trace_path is not None
    mobility = mobility if mobility is not None else build_mobility(cfg)
    if mobility.n_nodes != cfg.n_nodes:
        raise ConfigError(f"mobility has {mobility.n_nodes} nodes, configuration says {cfg.n_nodes}")
    flows = flows if flows is not None else build_flows(cfg)
    sim = Simulator(cfg.seed)
    recorder = Recorder(keep_records=keep_records)
    net = Network(sim, mobility, cfg.protocol, flows, cfg.duration, cfg.mac_config(), cfg.protocol_params,
                  recorder, check_interval)
    events = net.run()
    metrics = recorder.metrics(cfg.duration)
    metrics.events = events
    path = None
    if trace_path is not None:
        path = str(trace_path)
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n") as fh:
            write_trace(recorder.records, fh)
    return RunResult(cfg, metrics, recorder.records if keep_records else None, path, net)
