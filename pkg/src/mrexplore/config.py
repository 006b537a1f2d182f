"""Experiment configuration: a strict JSON file with sections
world / comms / graph / reward / run (plus an optional train section).

Unknown sections, unknown keys, and wrong types are rejected with
ConfigError rather than silently ignored, so a typo cannot quietly run a
different experiment. Every key has a default; the minimal valid config is
``{}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .comms import CommsMode, CommsParams
from .env import EpisodeConfig, RewardWeights, SurplusParams
from .errors import ConfigError
from .gridworld import MapKind, MapSpec, SensorSpec
from .roadmap import GraphParams

__all__ = ["ExperimentConfig", "TrainConfig", "load_config", "parse_config",
           "default_budget", "DEFAULT_CONFIG"]

#: Decision-step budget by map kind when the config leaves it null.
_BUDGET_BY_KIND = {
    MapKind.SIMPLE: 196,
    MapKind.CORRIDOR: 196,
    MapKind.HYBRID: 196,
    MapKind.COMPLEX: 384,
}

_POLICY_KINDS = ("random", "greedy", "nearest", "pursuit", "preplanned",
                 "learned")


def default_budget(kind: MapKind) -> int:
    return _BUDGET_BY_KIND[MapKind(kind)]


@dataclass
class TrainConfig:
    """Policy-gradient training knobs (the optional ``train`` section)."""

    episodes: int = 300
    lr: float = 3e-4
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    window: int = 25
    d_model: int = 64
    layers: int = 3
    stage: str = "full"

    def __post_init__(self):
        if self.episodes < 0:
            raise ConfigError(f"train.episodes must be >= 0, got {self.episodes}")
        if self.window < 1:
            raise ConfigError(f"train.window must be >= 1, got {self.window}")
        if self.stage not in ("easy", "difficult", "full"):
            raise ConfigError(f"train.stage must be easy/difficult/full, "
                              f"got {self.stage!r}")


@dataclass
class ExperimentConfig:
    """Everything a run needs: one episode recipe plus harness options."""

    episode: EpisodeConfig
    reps: int = 1
    policy: str = "greedy"
    weights: str | None = None
    pursuit_threshold: float = 50.0
    rendezvous_period: int = 20
    action_mode: str = "greedy"
    timing: bool = False
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.reps < 1:
            raise ConfigError(f"run.reps must be >= 1, got {self.reps}")
        if self.policy not in _POLICY_KINDS:
            raise ConfigError(f"run.policy must be one of {_POLICY_KINDS}, "
                              f"got {self.policy!r}")
        if self.action_mode not in ("greedy", "sample"):
            raise ConfigError(f"run.action_mode must be greedy or sample, "
                              f"got {self.action_mode!r}")
        if self.policy == "learned" and not self.weights:
            raise ConfigError("run.policy 'learned' needs run.weights")


class _Section:
    """Typed key extraction with strictness built in."""

    def __init__(self, name: str, data: dict):
        if not isinstance(data, dict):
            raise ConfigError(f"section {name!r} must be an object")
        self.name = name
        self.data = dict(data)

    def _pop(self, key, default):
        return self.data.pop(key, default)

    def number(self, key: str, default: float | None) -> float | None:
        v = self._pop(key, default)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{self.name}.{key} must be a number, got {v!r}")
        return float(v)

    def integer(self, key: str, default: int | None) -> int | None:
        v = self._pop(key, default)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{self.name}.{key} must be an integer, got {v!r}")
        return v

    def boolean(self, key: str, default: bool) -> bool:
        v = self._pop(key, default)
        if not isinstance(v, bool):
            raise ConfigError(f"{self.name}.{key} must be true/false, got {v!r}")
        return v

    def string(self, key: str, default: str | None) -> str | None:
        v = self._pop(key, default)
        if v is None:
            return None
        if not isinstance(v, str):
            raise ConfigError(f"{self.name}.{key} must be a string, got {v!r}")
        return v

    def finish(self):
        if self.data:
            extra = ", ".join(sorted(self.data))
            raise ConfigError(f"unknown key(s) in section {self.name!r}: {extra}")


def parse_config(raw: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from a decoded JSON object (strict)."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    raw = dict(raw)
    known = ("world", "comms", "graph", "reward", "run", "train")
    for section in raw:
        if section not in known:
            raise ConfigError(f"unknown config section {section!r}")

    world = _Section("world", raw.get("world", {}))
    kind_s = world.string("kind", "simple")
    try:
        kind = MapKind(kind_s)
    except ValueError:
        raise ConfigError(f"world.kind must be one of "
                          f"{[k.value for k in MapKind]}, got {kind_s!r}") from None
    map_spec = MapSpec(kind=kind,
                       seed=world.integer("map_seed", 0),
                       width_m=world.number("width_m", None),
                       height_m=world.number("height_m", None),
                       resolution=world.number("resolution", 0.5))
    sensor = SensorSpec(range_m=world.number("sensor_range_m", 10.0),
                        ray_count=world.integer("ray_count", 360))
    world.finish()

    comms = _Section("comms", raw.get("comms", {}))
    mode_s = comms.string("mode", "proximity")
    try:
        mode = CommsMode(mode_s)
    except ValueError:
        raise ConfigError(f"comms.mode must be one of "
                          f"{[m.value for m in CommsMode]}, got {mode_s!r}") from None
    comms_enabled = comms.boolean("enabled", True)
    comms_params = CommsParams(mode=mode,
                               d_comm=comms.number("d_comm", 30.0),
                               p_t_dbm=comms.number("p_t_dbm", 20.0),
                               p_thresh_dbm=comms.number("p_thresh_dbm", -80.0),
                               pl0_db=comms.number("pl0_db", 40.0),
                               exponent=comms.number("exponent", 3.0),
                               wall_db=comms.number("wall_db", 16.0),
                               d0=comms.number("d0", 1.0))
    comms.finish()

    graph = _Section("graph", raw.get("graph", {}))
    graph_params = GraphParams(lattice=graph.number("lattice", 2.0),
                               k=graph.integer("k", 8),
                               d_r=graph.number("d_r", None),
                               r_g=graph.number("r_g", 10.0),
                               r_m=graph.number("r_m", 3.0),
                               prune_period=graph.integer("prune_period", 5))
    graph.finish()

    reward = _Section("reward", raw.get("reward", {}))
    weights = RewardWeights(a1=reward.number("a1", 1.0),
                            a2=reward.number("a2", 0.1),
                            a3=reward.number("a3", 1.0),
                            a4=reward.number("a4", 0.5),
                            completion=reward.number("completion", 20.0),
                            gamma=reward.number("gamma", 0.99))
    surplus = SurplusParams(dm_min_cells=reward.integer("dm_min_cells", 40),
                            s_min=reward.number("s_min", 1.0))
    surplus_enabled = reward.boolean("surplus_enabled", True)
    reward.finish()

    run = _Section("run", raw.get("run", {}))
    budget = run.integer("budget", None)
    if budget is None:
        budget = default_budget(kind)
    episode = EpisodeConfig(map_spec=map_spec,
                            n_robots=run.integer("n_robots", 2),
                            budget=budget,
                            sensor=sensor,
                            comms=comms_params,
                            graph=graph_params,
                            reward=weights,
                            surplus=surplus,
                            seed=run.integer("seed", 0),
                            stagger=run.integer("stagger", 0),
                            comms_enabled=comms_enabled,
                            surplus_enabled=surplus_enabled)
    cfg = ExperimentConfig(
        episode=episode,
        reps=run.integer("reps", 1),
        policy=run.string("policy", "greedy"),
        weights=run.string("weights", None),
        pursuit_threshold=run.number("pursuit_threshold", 50.0),
        rendezvous_period=run.integer("rendezvous_period", 20),
        action_mode=run.string("action_mode", "greedy"),
        timing=run.boolean("timing", False),
        train=_parse_train(raw.get("train", {})))
    run.finish()
    return cfg


def _parse_train(data: dict) -> TrainConfig:
    t = _Section("train", data)
    out = TrainConfig(episodes=t.integer("episodes", 300),
                      lr=t.number("lr", 3e-4),
                      value_coef=t.number("value_coef", 0.5),
                      entropy_coef=t.number("entropy_coef", 0.01),
                      window=t.integer("window", 25),
                      d_model=t.integer("d_model", 64),
                      layers=t.integer("layers", 3),
                      stage=t.string("stage", "full"))
    t.finish()
    return out


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a JSON config file."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {p} is not valid JSON: {exc}") from exc
    return parse_config(raw)


#: A fully spelled-out config with every key at its default — the schema
#: reference (mirrored in the README and the shipped example configs).
DEFAULT_CONFIG: dict = {
    "world": {"kind": "simple", "map_seed": 0, "width_m": None,
              "height_m": None, "resolution": 0.5,
              "sensor_range_m": 10.0, "ray_count": 360},
    "comms": {"mode": "proximity", "enabled": True, "d_comm": 30.0,
              "p_t_dbm": 20.0, "p_thresh_dbm": -80.0, "pl0_db": 40.0,
              "exponent": 3.0, "wall_db": 16.0, "d0": 1.0},
    "graph": {"lattice": 2.0, "k": 8, "d_r": None, "r_g": 10.0, "r_m": 3.0,
              "prune_period": 5},
    "reward": {"a1": 1.0, "a2": 0.1, "a3": 1.0, "a4": 0.5,
               "completion": 20.0, "gamma": 0.99, "dm_min_cells": 40,
               "s_min": 1.0, "surplus_enabled": True},
    "run": {"n_robots": 2, "budget": None, "seed": 0, "reps": 1,
            "stagger": 0, "policy": "greedy", "weights": None,
            "pursuit_threshold": 50.0, "rendezvous_period": 20,
            "action_mode": "greedy", "timing": False},
    "train": {"episodes": 300, "lr": 3e-4, "value_coef": 0.5,
              "entropy_coef": 0.01, "window": 25, "d_model": 64,
              "layers": 3, "stage": "full"},
}
