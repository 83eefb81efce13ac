"""Run configuration: schema, defaults, validation and map loading.

A run config is a single JSON document:

{
  "map": "straight",            # shipped map name or a file path
  "seed": 0,
  "steps": 250,
  "spawn_prob": 0.3,            # per source per step; 0 disables spawning
  "max_agents": null,           # cap on concurrent agents
  "agent_params": {"a_min": -1, "a_max": 1, "v_min": 0, "v_max": 3},
  "lights": {"green_steps": 8, "yellow_steps": 2, "all_red_steps": 3},
  "placements": [               # fixed agents at t=0
    {"cell": [r, c], "heading": "east", "velocity": 0,
     "goal": [r, c], "tokens": 0}
  ]
}
"""

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .dynamics import AgentParams
from .geometry import HEADING_BY_NAME
from .lights import LightCycle
from .network import parse_map

SHIPPED_MAPS = ("straight", "small_city", "large_city", "single_block_loop", "two_way_t")

DEFAULT_SPAWN_PROB = 0.3


class ConfigError(ValueError):
    """Invalid run configuration; maps to exit code 5."""


@dataclass(frozen=True)
class Placement:
    cell: tuple
    heading: int
    velocity: int
    goal: tuple
    tokens: int = 0


@dataclass
class ScenarioConfig:
    map_name: str = "straight"
    map_text: str = ""
    seed: int = 0
    steps: int = 250
    spawn_prob: float = DEFAULT_SPAWN_PROB
    max_agents: int | None = None
    params: AgentParams = AgentParams()
    lights: LightCycle = LightCycle()
    placements: tuple = ()
    checks: bool = True
    force_actions: dict = field(default_factory=dict)  # test hook, not in files

    def canonical(self):
        """JSON-stable dict embedded in trace headers."""
        return {
            "map": self.map_name,
            "seed": self.seed,
            "steps": self.steps,
            "spawn_prob": self.spawn_prob,
            "max_agents": self.max_agents,
            "agent_params": dict(self.params._asdict()),
            "lights": dict(self.lights._asdict()),
            "placements": [
                {
                    "cell": list(p.cell),
                    "heading": p.heading,
                    "velocity": p.velocity,
                    "goal": list(p.goal),
                    "tokens": p.tokens,
                }
                for p in self.placements
            ],
        }


def load_map_text(name_or_path):
    path = Path(name_or_path)
    if path.suffix == ".csv" and path.exists():
        return path.read_text()
    if name_or_path in SHIPPED_MAPS:
        return resources.files("rose.maps").joinpath(f"{name_or_path}.csv").read_text()
    if path.exists():
        return path.read_text()
    raise ConfigError(f"unknown map {name_or_path!r}")


def _heading_value(value):
    if isinstance(value, int) and 0 <= value <= 3:
        return value
    try:
        return HEADING_BY_NAME[value]
    except (KeyError, TypeError):
        raise ConfigError(f"bad heading {value!r}") from None


def config_from_dict(data, **overrides):
    data = dict(data or {})
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        params = AgentParams(**data.get("agent_params", {})).validate()
        lights = LightCycle(**data.get("lights", {})).validate()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    placements = []
    for item in data.get("placements", ()):
        try:
            placements.append(
                Placement(
                    cell=tuple(item["cell"]),
                    heading=_heading_value(item["heading"]),
                    velocity=int(item.get("velocity", 0)),
                    goal=tuple(item["goal"]),
                    tokens=int(item.get("tokens", 0)),
                )
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad placement {item!r}: {exc}") from None
    spawn_prob = float(data.get("spawn_prob", DEFAULT_SPAWN_PROB))
    if not 0.0 <= spawn_prob <= 1.0:
        raise ConfigError(f"spawn_prob {spawn_prob} outside [0, 1]")
    steps = int(data.get("steps", 250))
    if steps < 0:
        raise ConfigError("steps must be >= 0")
    map_name = data.get("map", "straight")
    cfg = ScenarioConfig(
        map_name=str(map_name),
        map_text=data.get("map_text") or load_map_text(map_name),
        seed=int(data.get("seed", 0)),
        steps=steps,
        spawn_prob=spawn_prob,
        max_agents=data.get("max_agents"),
        params=params,
        lights=lights,
        placements=tuple(placements),
        checks=bool(data.get("checks", True)),
    )
    return cfg


def load_config(path=None, **overrides):
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    return config_from_dict(data, **overrides)


def network_for(config, max_bundle_lanes=2):
    try:
        return parse_map(config.map_text, max_bundle_lanes=max_bundle_lanes)
    except Exception as exc:
        raise ConfigError(f"bad map {config.map_name!r}: {exc}") from None
