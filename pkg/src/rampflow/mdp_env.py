"""The merge segment as a decision process: states, actions, rewards and episodes.

Equipped vehicles that hold the same cached bulletin see the same state, so
they are treated as one fleet decision per action interval.  Only the fleet
holding the freshest bulletin decides and produces learning transitions;
vehicles out of range keep their last headway and vehicles that never heard
a bulletin use the fallback headway.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, NamedTuple, Protocol

import numpy as np

from . import v2x
from .metrics import RunReport, SampleLog, avg_delay, build_report
from .road_world import (FALLBACK_HEADWAY, MIN_HEADWAY, Controller, LaneChangeParams, RoadGeometry,
                         TrafficDemand, World)
from .v2x import RsuConfig, TrafficBulletin

JAM_DENSITY = 150.0          # veh/km/lane
SPEED_NORM = 120.0 / 3.6     # m/s, the default main speed limit
RAMP_LENGTH_NORM = 360.0     # m
N_FEATURES = 5


class StateVec(NamedTuple):
    main_density: float
    ramp_density: float
    main_speed: float
    ramp_speed: float
    ramp_length: float

    def array(self) -> np.ndarray:
        return np.array(self, dtype=float)


def featurize(bulletin: TrafficBulletin) -> StateVec:
    raw = (bulletin.main_density / JAM_DENSITY, bulletin.ramp_density / JAM_DENSITY,
           bulletin.main_avg_speed / SPEED_NORM, bulletin.ramp_avg_speed / SPEED_NORM,
           bulletin.ramp_length / RAMP_LENGTH_NORM)
    return StateVec(*(min(max(float(x), 0.0), 1.0) for x in raw))


@dataclass(frozen=True)
class ActionSet:
    headways: tuple = tuple(np.linspace(MIN_HEADWAY, 40.0, 16).tolist())

    def __post_init__(self):
        h = np.asarray(self.headways, dtype=float)
        if h.size < 1:
            raise ValueError("action set is empty")
        if h[0] != MIN_HEADWAY:
            raise ValueError(f"smallest headway must be {MIN_HEADWAY} m")
        if np.any(np.diff(h) <= 0):
            raise ValueError("headways must be strictly increasing")
        object.__setattr__(self, "headways", tuple(float(x) for x in h))

    def __len__(self) -> int:
        return len(self.headways)

    def __getitem__(self, index: int) -> float:
        if not 0 <= index < len(self.headways):
            raise IndexError(f"action index {index} outside 0..{len(self.headways) - 1}")
        return self.headways[index]


def apply_action(world: World, indices, action_index: int | None, action_set: ActionSet) -> float:
    """Set the headway target of the vehicles at array ``indices``.

    ``None`` stands for "no bulletin yet": the fallback headway is used.
    """
    h = FALLBACK_HEADWAY if action_index is None else action_set[action_index]
    world.htarget[indices] = h
    return h


@dataclass(frozen=True)
class RewardConfig:
    congestion_speed: float = v2x.CONGESTION_SPEED
    segment_length: float = 1500.0
    delay_window: float = 60.0

    def __post_init__(self):
        if min(self.congestion_speed, self.segment_length, self.delay_window) <= 0:
            raise ValueError("reward config values must be positive")

    @property
    def threshold(self) -> float:
        return self.segment_length / self.congestion_speed


def reward(avg_delay_s: float, cfg: RewardConfig) -> int:
    if avg_delay_s < 0:
        raise ValueError("average delay must be non-negative")
    return 1 if avg_delay_s <= cfg.threshold else -1


def in_flight_delay(world: World) -> float:
    """Mean delay accumulated so far by vehicles still on the road (0 if none)."""
    if world.n == 0:
        return 0.0
    g = world.geometry
    ramp = world.origin == 1
    start = np.where(ramp, g.ramp_start, 0.0)
    on_ramp_part = np.clip(world.pos, None, g.merge_point) - start
    expected = np.where(ramp,
                        np.maximum(on_ramp_part, 0.0) / g.speed_limit_ramp
                        + np.maximum(world.pos - g.merge_point, 0.0) / g.speed_limit_main,
                        world.pos / g.speed_limit_main)
    return float(np.mean(np.maximum(world.clock - world.entry_time - expected, 0.0)))


def interval_reward(world: World, cfg: RewardConfig) -> int:
    window = (world.clock - cfg.delay_window, world.clock)
    d = avg_delay(world.completed_trips, window, world.geometry)
    if d is None:
        d = in_flight_delay(world)
    return reward(d, cfg)


class Transition(NamedTuple):
    s: tuple
    a: int
    r: int
    s_next: tuple
    done: bool

    def to_json(self) -> str:
        return json.dumps({"s": list(self.s), "a": self.a, "r": self.r,
                           "s_next": list(self.s_next), "done": self.done})


def export_jsonl(transitions: Iterable[Transition], path) -> None:
    with open(path, "w") as fh:
        for tr in transitions:
            fh.write(tr.to_json() + "\n")


def load_jsonl(path) -> list[Transition]:
    out = []
    with open(path) as fh:
        for line in fh:
            d = json.loads(line)
            out.append(Transition(tuple(d["s"]), int(d["a"]), int(d["r"]), tuple(d["s_next"]), bool(d["done"])))
    return out


# --------------------------------------------------------------------------
# policies
# --------------------------------------------------------------------------

class Agent(Protocol):
    def act(self, state: np.ndarray, explore: bool) -> int: ...
    def observe(self, transition: Transition) -> None: ...


class HeadwayPolicy(Protocol):
    """A rule-based policy: one headway per bulletin (``None`` = no bulletin)."""

    controller: Controller

    def headway(self, bulletin: TrafficBulletin | None) -> float: ...


@dataclass
class DaccPolicy:
    """Learned policy: the agent picks an action index from the featurized bulletin."""

    agent: Agent
    action_set: ActionSet = field(default_factory=ActionSet)
    learn: bool = True
    controller: Controller = Controller.DACC

    def choose(self, bulletin: TrafficBulletin) -> tuple[np.ndarray, int]:
        s = featurize(bulletin).array()
        return s, self.agent.act(s, self.learn)


# --------------------------------------------------------------------------
# episodes
# --------------------------------------------------------------------------

@dataclass
class Scenario:
    geometry: RoadGeometry = field(default_factory=RoadGeometry)
    demand: TrafficDemand = field(default_factory=TrafficDemand)
    lane_change: LaneChangeParams = field(default_factory=LaneChangeParams)
    rsu: RsuConfig = field(default_factory=RsuConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    horizon: float = 300.0
    warmup: float = 60.0
    action_interval: float = 1.0
    dt: float = 0.1

    def make_world(self, seed: int, initial_headway: float = FALLBACK_HEADWAY) -> World:
        return World(geometry=self.geometry, demand=self.demand, seed=seed, dt=self.dt,
                     lane_change_params=self.lane_change, initial_headway=initial_headway)

    def world_for(self, policy, seed: int) -> World:
        """A world whose equipped vehicles run ``policy``'s controller from the start."""
        sc = replace(self, demand=replace(self.demand, controller=policy.controller))
        h0 = FALLBACK_HEADWAY if isinstance(policy, DaccPolicy) else policy.headway(None)
        return sc.make_world(seed, h0)


@dataclass
class EpisodeResult:
    transitions: list
    report: RunReport
    rewards: list           # segment reward of every interval
    samples: SampleLog

    @property
    def mean_reward(self) -> float:
        rs = [tr.r for tr in self.transitions] or self.rewards
        return float(np.mean(rs)) if rs else float("nan")


def run_episode(world: World, policy, horizon: float, scenario: Scenario | None = None,
                on_interval: Callable[[World], None] | None = None, grid: bool = False) -> EpisodeResult:
    """Drive ``world`` (freshly built) for ``horizon`` seconds under ``policy``."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    sc = scenario or Scenario()
    substeps = int(round(sc.action_interval / world.dt))
    broadcast_every = max(int(round(sc.rsu.broadcast_period / sc.action_interval)), 1)
    n_intervals = int(round(horizon / sc.action_interval))
    learned = isinstance(policy, DaccPolicy)
    code = int(policy.controller)

    samples = SampleLog()
    transitions: list[Transition] = []
    rewards: list[int] = []
    pending = None      # (state, action) of the fresh fleet, waiting for its outcome
    for k in range(n_intervals):
        if k % broadcast_every == 0:
            v2x.deliver(v2x.aggregate(world, sc.reward.congestion_speed), world, sc.rsu)
        fresh = len(world.bulletins) - 1
        mine = world.ctrl == code
        decided = None
        for group in np.unique(world.bulletin[mine]):
            if learned and 0 <= group < fresh:
                continue    # stale bulletin: keep the last decision
            idx = np.flatnonzero(mine & (world.bulletin == group))
            bulletin = world.bulletins[group] if group >= 0 else None
            if not learned:
                world.htarget[idx] = policy.headway(bulletin)
            elif bulletin is None:
                apply_action(world, idx, None, policy.action_set)
            else:
                s, a = policy.choose(bulletin)
                apply_action(world, idx, a, policy.action_set)
                if group == fresh:
                    decided = (s, a)
        if pending is not None:
            s_next = featurize(world.bulletins[fresh]).array()
            tr = Transition(tuple(pending[0]), int(pending[1]), rewards[-1], tuple(s_next), False)
            transitions.append(tr)
            if policy.learn:
                policy.agent.observe(tr)
        pending = decided
        for _ in range(substeps):
            world.step()
        samples.record(world)
        rewards.append(interval_reward(world, sc.reward))
        if on_interval is not None:
            on_interval(world)
    if pending is not None:
        tr = Transition(tuple(pending[0]), int(pending[1]), rewards[-1],
                        tuple(featurize(v2x.aggregate(world, sc.reward.congestion_speed)).array()), True)
        transitions.append(tr)
        if policy.learn:
            policy.agent.observe(tr)
    report = build_report(world, samples, (sc.warmup, world.clock), grid=grid)
    return EpisodeResult(transitions, report, rewards, samples)
