"""Hybrid FSO/RF link switching: channel model, agents, harness and forecasting."""

from ._kernels import backend
from .atmosphere import WeatherParams
from .config import ExperimentConfig, ConfigError
from .environment import EnvConfig, LinkId, LinkSwitchEnv, oracle_reward
from .harness import compare, run, switching_cost

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "EnvConfig",
    "ExperimentConfig",
    "LinkId",
    "LinkSwitchEnv",
    "WeatherParams",
    "backend",
    "compare",
    "oracle_reward",
    "run",
    "switching_cost",
]
