"""Deterministic multi-miner simulation harness."""

from .config import ConfigError, ScenarioConfig, from_dict, load, loads
from .engine import InvariantViolation, Simulation, Streams, run
from .report import RunReport, chain_dump, write_outputs
from .library import load_scenario, scenario_library, scenario_names

__all__ = [
    "ConfigError",
    "InvariantViolation",
    "RunReport",
    "ScenarioConfig",
    "Simulation",
    "Streams",
    "chain_dump",
    "from_dict",
    "load",
    "load_scenario",
    "loads",
    "run",
    "scenario_library",
    "scenario_names",
    "write_outputs",
]
