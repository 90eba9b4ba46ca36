"""Glue between a RunConfig and episodes: build policies, run evaluation points and sweeps."""

from __future__ import annotations

import dataclasses
import logging
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

from .baselines import FixedHeadwayPolicy, ThresholdAccPolicy
from .config import RunConfig
from .dqn import GreedyAgent, load_model
from .mdp_env import DaccPolicy, EpisodeResult, run_episode
from .road_world import Controller

log = logging.getLogger(__name__)

SWEEP_AXES = ("headway", "penetration", "ramp_rate", "main_rate", "lane_length", "assertiveness")


class HumanOnlyPolicy:
    """No equipped vehicles at all; every new vehicle is a human driver."""

    controller = Controller.HUMAN

    def headway(self, bulletin=None) -> float:
        return 10.0


def make_policy(cfg: RunConfig, kind: str, model_path: str | None = None):
    if kind == "fixed":
        return FixedHeadwayPolicy(cfg.controller.headway)
    if kind == "threshold":
        tc = replace(cfg.controller.threshold, lane_count=cfg.geometry.main_lane_count)
        return ThresholdAccPolicy(tc)
    if kind == "human":
        return HumanOnlyPolicy()
    if kind == "dacc":
        path = model_path or cfg.controller.model
        if path is None:
            raise ValueError("the dacc controller needs a model file")
        net, _ = load_model(path, cfg.action_set)
        return DaccPolicy(GreedyAgent(net), cfg.action_set, learn=False)
    raise ValueError(f"unknown controller kind {kind!r}")


def run_once(cfg: RunConfig, policy, seed: int, grid: bool = False) -> EpisodeResult:
    scenario = cfg.scenario(policy.controller)
    world = scenario.world_for(policy, seed)
    return run_episode(world, policy, scenario.horizon, scenario, grid=grid)


def apply_axis(cfg: RunConfig, axis: str, value: float) -> RunConfig:
    """Copy of ``cfg`` with one swept quantity replaced."""
    if axis == "headway":
        return replace(cfg, controller=replace(cfg.controller, headway=float(value)))
    if axis in ("penetration", "ramp_rate", "main_rate", "assertiveness"):
        return replace(cfg, traffic=replace(cfg.traffic, **{axis: float(value)}))
    if axis == "lane_length":
        return replace(cfg, geometry=replace(cfg.geometry, accel_lane_length=float(value)))
    raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")


@dataclasses.dataclass(frozen=True)
class SweepPoint:
    axis: str
    value: float
    seed: int
    controller: str


def sweep_points(cfg: RunConfig, axis: str, values, controllers) -> list[SweepPoint]:
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    if not values:
        raise ValueError("sweep needs at least one value")
    seeds = [cfg.run.seed + k for k in range(cfg.run.seeds_per_point)]
    return [SweepPoint(axis, float(v), s, c) for v in values for c in controllers for s in seeds]


def run_point(cfg: RunConfig, point: SweepPoint, model_path: str | None = None) -> dict:
    row = {"axis": point.axis, "value": point.value, "seed": point.seed,
           "controller": point.controller, "status": "ok", "error": ""}
    try:
        pcfg = apply_axis(cfg, point.axis, point.value)
        policy = make_policy(pcfg, point.controller, model_path)
        report = run_once(pcfg, policy, point.seed).report
        row.update(report.row())
    except Exception as exc:     # recorded as a failed row; the sweep goes on
        log.debug("point %s failed:\n%s", point, traceback.format_exc())
        row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    return row


def _run_point_args(args):
    return run_point(*args)


def run_sweep(cfg: RunConfig, points: list[SweepPoint], model_path: str | None = None,
              jobs: int = 1) -> list[dict]:
    """Rows in the order of ``points`` whatever the degree of parallelism."""
    args = [(cfg, p, model_path) for p in points]
    if jobs <= 1:
        return [run_point(*a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_point_args, args))
