"""The shipped scenario library."""

from __future__ import annotations

from importlib import resources

from .config import ConfigError, ScenarioConfig, loads

_PACKAGE = "hetchain.simnet.scenarios"


def scenario_names() -> list[str]:
    files = resources.files(_PACKAGE).iterdir()
    return sorted(f.name[:-5] for f in files if f.name.endswith(".yaml"))


def scenario_text(name: str) -> str:
    path = resources.files(_PACKAGE) / f"{name}.yaml"
    if not path.is_file():
        raise ConfigError(f"invalid config: unknown scenario {name!r}")
    return path.read_text()


def load_scenario(name: str) -> ScenarioConfig:
    return loads(scenario_text(name))


def scenario_library() -> dict[str, ScenarioConfig]:
    return {name: load_scenario(name) for name in scenario_names()}
