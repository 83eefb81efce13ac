"""Deterministic grid-world traffic game with a decentralized agent protocol."""

from .config import ScenarioConfig, config_from_dict, load_config
from .dynamics import Action, AgentParams, Pose
from .engine import Game, SimulationFault, run
from .network import RoadNetwork, parse_map, serialize_map

__all__ = [
    "Action",
    "AgentParams",
    "Game",
    "Pose",
    "RoadNetwork",
    "ScenarioConfig",
    "SimulationFault",
    "config_from_dict",
    "load_config",
    "parse_map",
    "run",
    "serialize_map",
]

__version__ = "0.1.0"
