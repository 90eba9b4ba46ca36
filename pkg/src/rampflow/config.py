"""Run configuration: JSON in, resolved dataclasses out.

Unknown keys are errors; values outside the studied ranges only warn.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .baselines import ThresholdAccConfig
from .dqn import Hyperparams
from .mdp_env import ActionSet, RewardConfig, Scenario
from .road_world import Controller, LaneChangeParams, RoadGeometry, TrafficDemand
from .v2x import RsuConfig

log = logging.getLogger(__name__)

CONTROLLER_KINDS = ("dacc", "fixed", "threshold", "human")

# (low, high) ranges studied; outside them we warn
STUDIED_RANGES = {
    ("traffic", "main_rate"): (900.0, 3700.0),
    ("traffic", "ramp_rate"): (200.0, 900.0),
    ("geometry", "accel_lane_length"): (50.0, 180.0),
}
UNIT_INTERVAL = {("traffic", "penetration"), ("traffic", "assertiveness")}


class ConfigError(ValueError):
    pass


@dataclass
class TrafficBlock:
    main_rate: float = 2057.0
    ramp_rate: float = 900.0
    penetration: float = 0.6
    assertiveness: float = 1.0


@dataclass
class ControllerBlock:
    kind: str = "dacc"
    model: str | None = None
    headway: float = 10.0
    threshold: ThresholdAccConfig = field(default_factory=ThresholdAccConfig)


@dataclass
class MdpBlock:
    action_set: list = field(default_factory=lambda: list(ActionSet().headways))
    reward: RewardConfig = field(default_factory=RewardConfig)


@dataclass
class RunBlock:
    horizon: float = 300.0
    warmup: float = 60.0
    episodes: int = 1000
    seed: int = 0
    dt: float = 0.1
    eval_runs: int = 3
    seeds_per_point: int = 3
    sweep_controllers: list = field(default_factory=lambda: ["dacc", "threshold"])


@dataclass
class RunConfig:
    geometry: RoadGeometry = field(default_factory=RoadGeometry)
    traffic: TrafficBlock = field(default_factory=TrafficBlock)
    controller: ControllerBlock = field(default_factory=ControllerBlock)
    mdp: MdpBlock = field(default_factory=MdpBlock)
    dqn: Hyperparams = field(default_factory=Hyperparams)
    rsu: RsuConfig = field(default_factory=RsuConfig)
    lane_change: LaneChangeParams = field(default_factory=LaneChangeParams)
    run: RunBlock = field(default_factory=RunBlock)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @property
    def action_set(self) -> ActionSet:
        return ActionSet(tuple(self.mdp.action_set))

    def scenario(self, controller: Controller | None = None) -> Scenario:
        t = self.traffic
        ctrl = controller if controller is not None else Controller[self.controller.kind.upper()]
        demand = TrafficDemand(main_rate=t.main_rate, ramp_rate=t.ramp_rate, penetration=t.penetration,
                               controller=ctrl, assertiveness=t.assertiveness)
        return Scenario(geometry=self.geometry, demand=demand, lane_change=self.lane_change,
                        rsu=self.rsu, reward=self.mdp.reward, horizon=self.run.horizon,
                        warmup=self.run.warmup, dt=self.run.dt)


def _build(cls, data, path: str):
    """Instantiate dataclass ``cls`` from ``data``, recursing into dataclass-typed fields."""
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'} must be an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"unknown key(s) in {path or 'config'}: {sorted(unknown)}")
    defaults = cls()
    kwargs = {}
    for name, value in data.items():
        current = getattr(defaults, name)
        if dataclasses.is_dataclass(current):
            kwargs[name] = _build(type(current), value, f"{path}.{name}" if path else name)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from exc


def validate(cfg: RunConfig) -> list[str]:
    """Hard errors raise; soft range problems come back as warning strings."""
    if cfg.controller.kind not in CONTROLLER_KINDS:
        raise ConfigError(f"controller.kind must be one of {CONTROLLER_KINDS}")
    if cfg.controller.headway < 2.5:
        raise ConfigError("controller.headway must be >= 2.5 m")
    if cfg.run.horizon <= 0 or cfg.run.episodes < 1 or cfg.run.eval_runs < 1 or cfg.run.seeds_per_point < 1:
        raise ConfigError("run.horizon, run.episodes, run.eval_runs and run.seeds_per_point must be positive")
    if not 0 <= cfg.run.warmup < cfg.run.horizon:
        raise ConfigError("run.warmup must be in [0, horizon)")
    for name in cfg.run.sweep_controllers:
        if name not in CONTROLLER_KINDS:
            raise ConfigError(f"unknown sweep controller {name!r}")
    ActionSet(tuple(cfg.mdp.action_set))
    problems = []
    for (block, key), (lo, hi) in STUDIED_RANGES.items():
        v = getattr(getattr(cfg, block), key)
        if not lo <= v <= hi:
            problems.append(f"{block}.{key}={v} is outside the studied range [{lo}, {hi}]")
    for block, key in UNIT_INTERVAL:
        v = getattr(getattr(cfg, block), key)
        if not 0 <= v <= 1:
            raise ConfigError(f"{block}.{key} must be in [0, 1]")
    return problems


def from_dict(data: dict) -> RunConfig:
    cfg = _build(RunConfig, data, "")
    for msg in validate(cfg):
        warnings.warn(msg, stacklevel=2)
        log.warning(msg)
    return cfg


def load_config(path) -> RunConfig:
    if path is None:
        return from_dict({})
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(data)
