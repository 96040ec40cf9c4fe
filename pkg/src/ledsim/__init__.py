"""Packet-level and fluid-model simulation of LEDBAT-family congestion control."""

__version__ = "0.1.0"

from .config import ConfigError, FlowConfig, ScenarioConfig  # noqa: E402
from .fluid import FluidParams, equilibrium, integrate  # noqa: E402
from .metrics import efficiency, jain_index, protocol_breakdown  # noqa: E402
from .presets import preset  # noqa: E402
from .simulation import simulate  # noqa: E402

__all__ = [
    "ConfigError",
    "FlowConfig",
    "FluidParams",
    "ScenarioConfig",
    "efficiency",
    "equilibrium",
    "integrate",
    "jain_index",
    "preset",
    "protocol_breakdown",
    "simulate",
]
