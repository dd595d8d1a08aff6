"""Discrete-event dumbbell simulator."""

from .bundle import MetricsBundle
from .engine import EventLoop, SimulationError
from .scenario import ConfigError, ScenarioConfig, Simulation, load_config, parse_pattern, run

__all__ = [
    "ConfigError", "EventLoop", "MetricsBundle", "ScenarioConfig", "Simulation",
    "SimulationError", "load_config", "parse_pattern", "run",
]
