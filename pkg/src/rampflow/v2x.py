"""Roadside unit: traffic aggregation and periodic broadcast to equipped vehicles.

The channel is ideal (no loss, no latency).  Vehicles cache the last
bulletin they heard; out-of-range vehicles keep a stale copy.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .road_world import RAMP_LANE, Controller, World

CONGESTION_SPEED = 60.0 / 3.6

# controllers that listen to the RSU
LISTENERS = (Controller.DACC, Controller.THRESHOLD)


@dataclass(frozen=True)
class TrafficBulletin:
    main_density: float      # veh/km/lane
    main_avg_speed: float    # m/s
    ramp_density: float      # veh/km/lane
    ramp_avg_speed: float    # m/s
    ramp_length: float       # m
    segment_length: float    # m
    congestion_speed: float  # m/s
    timestamp: float         # s

    def __post_init__(self):
        if min(self.main_density, self.ramp_density) < 0:
            raise ValueError("densities must be non-negative")
        if min(self.main_avg_speed, self.ramp_avg_speed) < 0:
            raise ValueError("speeds must be non-negative")
        if min(self.ramp_length, self.segment_length, self.congestion_speed) <= 0:
            raise ValueError("ramp_length, segment_length and congestion_speed must be positive")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrafficBulletin":
        return cls(**json.loads(text))


@dataclass(frozen=True)
class RsuConfig:
    position: float = 600.0
    range: float = 500.0
    broadcast_period: float = 1.0

    def __post_init__(self):
        if self.range <= 0:
            raise ValueError("range must be positive")
        if self.broadcast_period <= 0:
            raise ValueError("broadcast_period must be positive")


def aggregate(world: World, congestion_speed: float = CONGESTION_SPEED) -> TrafficBulletin:
    """Densities and mean speeds on the main lanes and on the ramp.

    An empty lane group reports its speed limit so the state is always defined.
    The ramp group is the ramp plus the acceleration lane (one lane).
    """
    g = world.geometry
    on_segment = (world.pos >= 0) & (world.pos <= g.segment_length)
    main = on_segment & (world.lane >= 0)
    ramp = world.lane == RAMP_LANE
    main_km = g.segment_length / 1000.0 * g.main_lane_count
    ramp_km = (g.ramp_length + g.accel_lane_length) / 1000.0
    n_main, n_ramp = int(main.sum()), int(ramp.sum())
    return TrafficBulletin(
        main_density=n_main / main_km,
        main_avg_speed=float(world.speed[main].mean()) if n_main else g.speed_limit_main,
        ramp_density=n_ramp / ramp_km,
        ramp_avg_speed=float(world.speed[ramp].mean()) if n_ramp else g.speed_limit_ramp,
        ramp_length=g.ramp_length,
        segment_length=g.segment_length,
        congestion_speed=congestion_speed,
        timestamp=world.clock,
    )


def deliver(bulletin: TrafficBulletin, world: World, rsu: RsuConfig) -> set[int]:
    """Hand ``bulletin`` to every listening vehicle within range; returns their ids.

    Raises if the timestamp does not advance past the previous broadcast.
    """
    if world.bulletins and bulletin.timestamp <= world.bulletins[-1].timestamp:
        raise ValueError("bulletin timestamps must be strictly increasing")
    listening = np.isin(world.ctrl, [int(c) for c in LISTENERS])
    hit = listening & (np.abs(world.pos - rsu.position) <= rsu.range)
    world.bulletins.append(bulletin)
    world.bulletin[hit] = len(world.bulletins) - 1
    return {int(v) for v in world.vid[hit]}


def cached_bulletin(world: World, index: int) -> TrafficBulletin | None:
    """Bulletin cached by the vehicle at array ``index`` (``None`` if it never heard one)."""
    k = int(world.bulletin[index])
    return world.bulletins[k] if k >= 0 else None
