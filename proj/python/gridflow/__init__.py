"""Python front end for the gridflow simulator."""

from ._core import (
    ConfigError,
    RunResult,
    ScenarioConfig,
    SimulationError,
    allocate_rates,
    engine_resources,
    load_config,
    oracle_resources,
    run,
    water_fill,
)

__all__ = [
    "ConfigError",
    "RunResult",
    "ScenarioConfig",
    "SimulationError",
    "allocate_rates",
    "engine_resources",
    "load_config",
    "oracle_resources",
    "run",
    "run_file",
    "water_fill",
]


def run_file(path, overrides=()):
    """Load a scenario file, apply key=value overrides and run it."""
    return run(load_config(str(path), list(overrides)))
