"""Deterministic discrete-event simulation of AODV, DSR and DSDV over Manhattan grid mobility."""

from .engine import Simulator
from .mac import MacConfig
from .metrics import RunMetrics, aggregate
from .mobility import GridSpec, MobilityScenario, generate_manhattan
from .scenario import ScenarioConfig, run_scenario

__version__ = "0.1.0"

__all__ = ["GridSpec", "MacConfig", "MobilityScenario", "RunMetrics", "ScenarioConfig", "Simulator", "aggregate",
           "generate_manhattan", "run_scenario"]
