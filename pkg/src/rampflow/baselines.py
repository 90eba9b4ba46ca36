"""Comparison controllers: a fixed headway and a flow-threshold switch."""

from __future__ import annotations

from dataclasses import dataclass

from .road_world import MIN_HEADWAY, Controller
from .v2x import TrafficBulletin


@dataclass(frozen=True)
class FixedHeadwayPolicy:
    h: float
    controller: Controller = Controller.FIXED

    def __post_init__(self):
        if self.h < MIN_HEADWAY:
            raise ValueError(f"headway {self.h} m is below the {MIN_HEADWAY} m minimum")

    def headway(self, bulletin: TrafficBulletin | None = None) -> float:
        return self.h


def fixed_headway_policy(h: float) -> FixedHeadwayPolicy:
    return FixedHeadwayPolicy(h)


@dataclass(frozen=True)
class ThresholdAccConfig:
    flow_threshold: float = 1800.0   # veh/h
    h_low: float = 5.0
    h_high: float = 15.0
    lane_count: int = 2

    def __post_init__(self):
        if self.h_low < MIN_HEADWAY:
            raise ValueError(f"h_low must be >= {MIN_HEADWAY} m")
        if not self.h_low < self.h_high:
            raise ValueError("h_low must be below h_high")


def measured_flow(bulletin: TrafficBulletin, lane_count: int) -> float:
    """Main-road flow in veh/h from density (veh/km/lane) and speed (m/s)."""
    return bulletin.main_density * bulletin.main_avg_speed * 3.6 * lane_count


def threshold_acc_policy(bulletin: TrafficBulletin | None, cfg: ThresholdAccConfig) -> float:
    """Small gaps in heavy flow, large gaps otherwise or without a bulletin."""
    if bulletin is None:
        return cfg.h_high
    return cfg.h_low if measured_flow(bulletin, cfg.lane_count) >= cfg.flow_threshold else cfg.h_high


@dataclass(frozen=True)
class ThresholdAccPolicy:
    cfg: ThresholdAccConfig = ThresholdAccConfig()
    controller: Controller = Controller.THRESHOLD

    def headway(self, bulletin: TrafficBulletin | None) -> float:
        return threshold_acc_policy(bulletin, self.cfg)
