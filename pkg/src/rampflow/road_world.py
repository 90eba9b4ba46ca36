"""Highway segment with one on-ramp: geometry, vehicles, car following, lane changing.

The world is stored as parallel numpy arrays (one entry per vehicle) so that a
step over ~100 vehicles costs a handful of vectorised operations.  The scalar
model functions (``car_following_accel``, ``acc_gap_control``, ...) accept
either floats or arrays and are the same code paths the step uses.

Positions are measured along the main carriageway and refer to the front
bumper.  Lane ``RAMP_LANE`` (-1) is the on-ramp plus its acceleration lane;
main lanes are numbered 0 (rightmost, adjacent to the ramp) upwards.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels as _k
from .metrics import fuel_rate

A_MAX = 2.6
B_HARD = 4.5
MIN_HEADWAY = 2.5
VEHICLE_LENGTH = 4.0
RAMP_LANE = -1
DT = 0.1
# bumper gap the kinematic safety layer keeps in reserve, meters
SAFETY_MARGIN = 0.5
FALLBACK_HEADWAY = 10.0

_KEY_STRIDE = 1.0e6


class Controller(enum.IntEnum):
    DACC = 0
    FIXED = 1
    THRESHOLD = 2
    HUMAN = 3


class Origin(enum.IntEnum):
    MAIN = 0
    RAMP = 1


class LaneChange(enum.IntEnum):
    STAY = 0
    LEFT = 1
    RIGHT = 2


class CollisionError(RuntimeError):
    """Raised when two vehicles on one lane overlap; carries a state dump."""


@dataclass(frozen=True)
class RoadGeometry:
    segment_length: float = 1500.0
    main_lane_count: int = 2
    ramp_length: float = 360.0
    accel_lane_length: float = 180.0
    merge_point: float = 600.0
    speed_limit_main: float = 120 / 3.6
    speed_limit_ramp: float = 80 / 3.6

    def __post_init__(self):
        if not self.segment_length > self.accel_lane_length > 0:
            raise ValueError("need segment_length > accel_lane_length > 0")
        if self.ramp_length <= 0:
            raise ValueError("ramp_length must be positive")
        if self.main_lane_count < 1:
            raise ValueError("main_lane_count must be >= 1")
        if self.merge_point + self.accel_lane_length > self.segment_length:
            raise ValueError("acceleration lane runs past the segment end")
        if self.speed_limit_main <= 0 or self.speed_limit_ramp <= 0:
            raise ValueError("speed limits must be positive")

    @property
    def ramp_start(self) -> float:
        return self.merge_point - self.ramp_length

    @property
    def accel_lane_end(self) -> float:
        return self.merge_point + self.accel_lane_length

    def free_flow_time(self, origin: int) -> float:
        """Travel time of an unimpeded trip from the given origin to the segment end."""
        if origin == Origin.RAMP:
            return (self.ramp_length / self.speed_limit_ramp
                    + (self.segment_length - self.merge_point) / self.speed_limit_main)
        return self.segment_length / self.speed_limit_main


@dataclass(frozen=True)
class IdmParams:
    a_max: float = A_MAX
    b: float = 2.0
    s0: float = MIN_HEADWAY
    time_headway: float = 1.0
    delta: float = 4.0

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.a_max, self.b, self.s0, self.time_headway, self.delta])


# Human drivers use the full IDM.  Equipped vehicles run the ACC law against an
# IDM with zero time headway, which only contributes the braking needed to
# avoid closing in on a slower leader.
HUMAN_IDM = IdmParams()
ACC_SAFETY_IDM = IdmParams(time_headway=0.0)


@dataclass(frozen=True)
class AccGains:
    k_gap: float = 0.23
    k_speed: float = 0.74


@dataclass(frozen=True)
class LaneChangeParams:
    b_safe: float = 2.0
    kappa: float = 1.0
    min_gap: float = MIN_HEADWAY
    politeness: float = 0.3
    threshold: float = 0.2
    keep_right_bias: float = 0.1
    merge_bias: float = 0.5
    merge_urgency: float = 3.0
    cooldown: float = 3.0
    # speed-proportional part of the accepted gap, seconds
    time_gap: float = 1.0
    # lane-0 vehicles yield to a merger within this many meters once it has
    # less than ``yield_urgency`` of the acceleration lane left, if that costs
    # at most ``b_coop`` of braking
    yield_lookahead: float = 60.0
    yield_urgency: float = 0.5
    b_coop: float = 2.0

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.b_safe, self.kappa, self.min_gap, self.politeness, self.threshold,
                         self.keep_right_bias, self.merge_bias, self.merge_urgency, self.cooldown,
                         self.time_gap])


@dataclass
class Vehicle:
    id: int
    lane: int
    position: float
    speed: float
    accel: float = 0.0
    length: float = VEHICLE_LENGTH
    headway_target: float = FALLBACK_HEADWAY
    controller: Controller = Controller.HUMAN
    entry_time: float = 0.0
    assertiveness: float = 1.0
    speed_factor: float = 1.0
    origin: Origin = Origin.MAIN

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError("speed must be non-negative")
        if self.headway_target < MIN_HEADWAY:
            raise ValueError(f"headway_target below {MIN_HEADWAY} m")


class TripRecord(NamedTuple):
    vehicle_id: int
    origin: int
    controller: int
    entry_time: float
    exit_time: float
    fuel: float


# --------------------------------------------------------------------------
# Longitudinal models
# --------------------------------------------------------------------------

def _apply(fn, args, extra=()):
    """Call a compiled scalar kernel on scalars, or element-wise on arrays."""
    if all(np.ndim(a) == 0 for a in args):
        return fn(*(float(a) for a in args), *extra)
    arrays = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in args))
    out = np.empty(arrays[0].shape)
    for idx in np.ndindex(out.shape):
        out[idx] = fn(*(a[idx] for a in arrays), *extra)
    return out


def car_following_accel(v, v_lead, gap, free_speed, params: IdmParams = HUMAN_IDM):
    """IDM acceleration, clamped to the vehicle's physical bounds.

    ``gap = inf`` means no leader.  A non-positive gap with a leader returns
    the hard braking value instead of raising.
    """
    return _apply(_k.idm, (v, v_lead, gap, free_speed), (params.vector,))


def acc_linear_law(gap, headway_target, v, v_lead, gains: AccGains = AccGains()):
    """Constant-distance-gap feedback law, unclamped."""
    return gains.k_gap * (np.asarray(gap) - headway_target) + gains.k_speed * (np.asarray(v_lead) - v)


def acc_gap_control(gap, headway_target, v, v_lead, free_speed=120 / 3.6,
                    gains: AccGains = AccGains(), safety: IdmParams = ACC_SAFETY_IDM):
    """ACC acceleration: the gap law, never above what the safety model allows."""
    return _apply(_k.acc_gap, (gap, headway_target, v, v_lead, free_speed),
                  (gains.k_gap, gains.k_speed, safety.vector))


def vehicle_accel(controller, headway_target, v, v_lead, gap, free_speed):
    """Model acceleration for human (IDM) or ACC-equipped vehicles."""
    g = AccGains()
    return _apply(_k.model_accel, (controller, headway_target, v, v_lead, gap, free_speed),
                  (HUMAN_IDM.vector, ACC_SAFETY_IDM.vector, g.k_gap, g.k_speed))


def stopping_distance(v, b: float = B_HARD, dt: float = DT):
    """Distance covered after the current step when braking at ``b`` on every later step."""
    return _apply(_k.stopping_distance, (v,), (b, dt))


def max_safe_speed(budget, b: float = B_HARD, dt: float = DT):
    """Largest ``u`` with ``u*dt + stopping_distance(u) <= budget``.

    Discrete analogue of the Krauss safe speed: keeping the next speed below
    it lets a vehicle stop behind a leader that brakes at ``b``.
    """
    return _apply(_k.max_safe_speed, (budget,), (b, dt))


# --------------------------------------------------------------------------
# Lane changing (MOBIL with an assertiveness knob)
# --------------------------------------------------------------------------

def gap_acceptable(v, lead_gap, lead_speed, follow_gap, follow_speed, follower_accel_after,
                   assertiveness, params: LaneChangeParams = LaneChangeParams(), dt: float = DT):
    """Safety half of the lane-change rule.

    Missing neighbours are passed as ``inf`` gaps.  The comfort bound and the
    speed-dependent minimum gaps are both relaxed by assertiveness; the
    changer and its new follower must also keep the ability to stop at hard
    braking, whatever the assertiveness.
    """
    ok = _apply(_k.gap_ok, (v, lead_gap, lead_speed, follow_gap, follow_speed, follower_accel_after,
                            assertiveness), (params.b_safe, params.kappa, params.min_gap, params.time_gap, dt))
    return bool(ok) if np.ndim(ok) == 0 else ok.astype(bool)


def change_incentive(own_now, own_after, new_follower_now, new_follower_after,
                     old_follower_now, old_follower_after, bias,
                     params: LaneChangeParams = LaneChangeParams()):
    """MOBIL incentive: own gain plus politeness-weighted gain of both followers."""
    return _apply(_k.incentive, (own_now, own_after, new_follower_now, new_follower_after,
                                 old_follower_now, old_follower_after, bias), (params.politeness,))


def merge_bias(position, geometry: RoadGeometry, params: LaneChangeParams = LaneChangeParams()):
    """Extra incentive for a ramp vehicle; grows linearly as the lane end nears."""
    return _apply(_k.merge_bias, (position,), (geometry.accel_lane_end, geometry.accel_lane_length,
                                               params.merge_bias, params.merge_urgency))


@dataclass
class Neighbor:
    """A nearby vehicle; ``gap`` is bumper to bumper from the follower's side."""
    gap: float
    speed: float
    controller: Controller = Controller.HUMAN
    headway_target: float = FALLBACK_HEADWAY
    free_speed: float = 120 / 3.6
    # a follower's own leader before the change
    own_gap: float = math.inf
    own_leader_speed: float = math.nan


@dataclass
class Neighbors:
    """Surroundings of one vehicle; ``None`` marks an absent neighbour.

    ``left``/``right`` hold ``(leader, follower)`` on that lane, or are
    ``None`` when the lane does not exist or may not be entered.
    """
    leader: Neighbor | None = None
    follower: Neighbor | None = None
    left: tuple[Neighbor | None, Neighbor | None] | None = None
    right: tuple[Neighbor | None, Neighbor | None] | None = None
    free_speed: float = 120 / 3.6
    target_free_speed: float = 120 / 3.6
    bias_left: float = 0.0
    bias_right: float = 0.0


def _gap_speed(n: Neighbor | None):
    return (math.inf, math.nan) if n is None else (n.gap, n.speed)


def _follower_accel(f: Neighbor, leader_speed, leader_gap):
    return vehicle_accel(f.controller, f.headway_target, f.speed, leader_speed, leader_gap, f.free_speed)


def lane_change_decision(vehicle: Vehicle, neighbors: Neighbors, assertiveness: float,
                         params: LaneChangeParams = LaneChangeParams()) -> LaneChange:
    """Decide stay/left/right for a single vehicle (same rule the world applies in bulk)."""
    v = vehicle.speed
    lead_gap, lead_speed = _gap_speed(neighbors.leader)
    own_now = vehicle_accel(vehicle.controller, vehicle.headway_target, v, lead_speed, lead_gap,
                            neighbors.free_speed)
    old_f = neighbors.follower
    if old_f is not None:
        old_now = _follower_accel(old_f, v, old_f.gap)
        old_after = _follower_accel(old_f, lead_speed, old_f.gap + vehicle.length + lead_gap)
    else:
        old_now = old_after = 0.0

    best, best_gain = LaneChange.STAY, -math.inf
    for choice, side, bias in ((LaneChange.LEFT, neighbors.left, neighbors.bias_left),
                               (LaneChange.RIGHT, neighbors.right, neighbors.bias_right)):
        if side is None:
            continue
        new_lead, new_follow = side
        nl_gap, nl_speed = _gap_speed(new_lead)
        nf_gap, nf_speed = _gap_speed(new_follow)
        if new_follow is not None:
            # an ACC setpoint is invisible to the changer: judge the follower as a human
            nf_now = vehicle_accel(Controller.HUMAN, new_follow.headway_target, new_follow.speed,
                                   new_follow.own_leader_speed, new_follow.own_gap, new_follow.free_speed)
            nf_after = vehicle_accel(Controller.HUMAN, new_follow.headway_target, new_follow.speed,
                                     v, nf_gap, new_follow.free_speed)
        else:
            nf_now = nf_after = 0.0
        if not gap_acceptable(v, nl_gap, nl_speed, nf_gap, nf_speed, nf_after, assertiveness, params):
            continue
        own_after = vehicle_accel(vehicle.controller, vehicle.headway_target, v, nl_speed, nl_gap,
                                  neighbors.target_free_speed)
        gain = change_incentive(own_now, own_after, nf_now, nf_after, old_now, old_after, bias, params)
        if gain > params.threshold and gain > best_gain:
            best, best_gain = choice, gain
    return best


# --------------------------------------------------------------------------
# World
# --------------------------------------------------------------------------

_FLOAT_FIELDS = ("pos", "speed", "accel", "length", "htarget", "vfactor", "entry_time",
                 "assertiveness", "fuel", "forced", "last_lc")
_INT_FIELDS = ("vid", "lane", "ctrl", "origin", "bulletin")


@dataclass
class TrafficDemand:
    """Arrival rates (veh/h) and the equipped share of new vehicles.

    ``main_rate`` is the demand of the whole main road; it is split evenly
    over the main lanes.
    """

    main_rate: float = 2057.0
    ramp_rate: float = 900.0
    penetration: float = 0.0
    controller: Controller = Controller.DACC
    assertiveness: float = 1.0
    speed_factor_sd: float = 0.1

    def __post_init__(self):
        if self.main_rate < 0 or self.ramp_rate < 0:
            raise ValueError("arrival rates must be non-negative")
        if not 0.0 <= self.penetration <= 1.0:
            raise ValueError("penetration must be in [0, 1]")


def make_streams(seed: int) -> dict[str, np.random.Generator]:
    """Named, independent generators derived from one master seed."""
    root = np.random.SeedSequence(seed)
    names = ("arrivals", "lane_change", "exploration")
    return {name: np.random.default_rng(child) for name, child in zip(names, root.spawn(len(names)))}


@dataclass
class World:
    """Mutable world state; advanced in place by :meth:`step`."""

    geometry: RoadGeometry = field(default_factory=RoadGeometry)
    demand: TrafficDemand = field(default_factory=TrafficDemand)
    seed: int = 0
    dt: float = DT
    lane_change_params: LaneChangeParams = field(default_factory=LaneChangeParams)
    initial_headway: float = FALLBACK_HEADWAY
    human_idm: IdmParams = HUMAN_IDM
    acc_safety: IdmParams = ACC_SAFETY_IDM
    gains: AccGains = field(default_factory=AccGains)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        self.clock = 0.0
        self.steps = 0
        self.rng_streams = make_streams(self.seed)
        self.completed_trips: list[TripRecord] = []
        self.spawned = 0
        self._next_id = 0
        n_queues = self.geometry.main_lane_count + 1
        self.queues: list[list[tuple]] = [[] for _ in range(n_queues)]
        for name in _FLOAT_FIELDS:
            setattr(self, name, np.zeros(0))
        for name in _INT_FIELDS:
            setattr(self, name, np.zeros(0, dtype=np.int64))
        self.bulletins: list = []

    # -- bookkeeping -------------------------------------------------------

    @property
    def n(self) -> int:
        return self.pos.size

    @property
    def queued(self) -> int:
        return sum(len(q) for q in self.queues)

    def _append(self, **values):
        for name in _FLOAT_FIELDS + _INT_FIELDS:
            arr = getattr(self, name)
            setattr(self, name, np.append(arr, np.asarray(values[name], dtype=arr.dtype)))

    def _keep(self, mask):
        for name in _FLOAT_FIELDS + _INT_FIELDS:
            setattr(self, name, getattr(self, name)[mask])

    def add_vehicle(self, vehicle: Vehicle, bulletin: int = -1) -> int:
        """Place a vehicle directly (counts as spawned)."""
        self._append(vid=vehicle.id, lane=vehicle.lane, pos=vehicle.position, speed=vehicle.speed,
                     accel=vehicle.accel, length=vehicle.length, htarget=vehicle.headway_target,
                     ctrl=int(vehicle.controller), origin=int(vehicle.origin),
                     vfactor=vehicle.speed_factor, entry_time=vehicle.entry_time,
                     assertiveness=vehicle.assertiveness, fuel=0.0, forced=np.nan,
                     last_lc=-np.inf, bulletin=bulletin)
        self._next_id = max(self._next_id, vehicle.id + 1)
        self.spawned += 1
        return vehicle.id

    def index_of(self, vid: int) -> int:
        hits = np.flatnonzero(self.vid == vid)
        if hits.size == 0:
            raise KeyError(vid)
        return int(hits[0])

    def vehicle(self, vid: int) -> Vehicle:
        i = self.index_of(vid)
        return Vehicle(id=int(self.vid[i]), lane=int(self.lane[i]), position=float(self.pos[i]),
                       speed=float(self.speed[i]), accel=float(self.accel[i]),
                       length=float(self.length[i]), headway_target=float(self.htarget[i]),
                       controller=Controller(int(self.ctrl[i])), entry_time=float(self.entry_time[i]),
                       assertiveness=float(self.assertiveness[i]), speed_factor=float(self.vfactor[i]),
                       origin=Origin(int(self.origin[i])))

    def vehicles(self) -> list[Vehicle]:
        """Snapshot ordered by (lane, position)."""
        order = np.lexsort((self.pos, self.lane))
        return [self.vehicle(int(self.vid[i])) for i in order]

    def force_accel(self, vid: int, accel: float | None) -> None:
        """Script a vehicle's acceleration (bounds and safety still apply); ``None`` releases it."""
        self.forced[self.index_of(vid)] = np.nan if accel is None else accel

    def free_speed_at(self, lane: int, pos: float, vfactor: float = 1.0) -> float:
        g = self.geometry
        return _k.free_speed(lane, pos, vfactor, g.merge_point, g.speed_limit_main, g.speed_limit_ramp)

    # -- neighbourhood -------------------------------------------------------

    def _sorted(self):
        keys = (self.lane + 1) * _KEY_STRIDE + self.pos
        order = np.argsort(keys, kind="stable")
        return order, keys[order]

    def leaders(self):
        """Index of each vehicle's same-lane leader (-1 if none) and the bumper gap to it."""
        order, _ = self._sorted()
        return _k.leaders(order, self.lane, self.pos, self.length)

    # -- dynamics --------------------------------------------------------------

    def accelerations(self, order=None) -> np.ndarray:
        """Bounded accelerations for the current state, including the kinematic safety cap."""
        if order is None:
            order, _ = self._sorted()
        gains = self.gains
        g = self.geometry
        lc = self.lane_change_params
        coop = np.array([lc.yield_lookahead, lc.yield_urgency, lc.b_coop])
        return _k.accelerations(order, self.lane, self.pos, self.speed, self.length, self.htarget,
                                self.ctrl, self.vfactor, self.forced, g.merge_point, g.accel_lane_end,
                                g.accel_lane_length, g.speed_limit_main, g.speed_limit_ramp,
                                self.human_idm.vector, self.acc_safety.vector,
                                gains.k_gap, gains.k_speed, coop, self.dt)

    def step(self, dt: float | None = None) -> None:
        """Advance one time step: accelerate, move, change lanes, retire exits, spawn."""
        if dt is not None and abs(dt - self.dt) > 1e-12:
            raise ValueError("dt is fixed per world")
        dt = self.dt
        if self.n:
            order, _ = self._sorted()
            acc = self.accelerations(order)
            v_new = np.maximum(self.speed + acc * dt, 0.0)
            self.accel = (v_new - self.speed) / dt
            self.fuel = self.fuel + fuel_rate(v_new, self.accel) * dt
            self.speed = v_new
            self.pos = self.pos + v_new * dt
            # no overtaking within a lane, so the order survives integration
            self._lane_changes(order)
            self._check_overlap()
            self._remove_exits()
        self.clock = round(self.clock + dt, 9)
        self.steps += 1
        self._spawn_arrivals()

    def _check_overlap(self):
        lead, gap = self.leaders()
        bad = (lead >= 0) & (gap <= 0)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            j = int(lead[i])
            raise CollisionError(
                f"overlap at t={self.clock:.1f}s lane {self.lane[i]}: vehicle {self.vid[i]} "
                f"(x={self.pos[i]:.2f}, v={self.speed[i]:.2f}) behind {self.vid[j]} "
                f"(x={self.pos[j]:.2f}, v={self.speed[j]:.2f}), gap={gap[i]:.3f}")

    def _remove_exits(self):
        done = self.pos >= self.geometry.segment_length
        if not np.any(done):
            return
        exit_time = round(self.clock + self.dt, 9)
        for i in np.flatnonzero(done):
            self.completed_trips.append(TripRecord(
                int(self.vid[i]), int(self.origin[i]), int(self.ctrl[i]),
                float(self.entry_time[i]), exit_time, float(self.fuel[i])))
        self._keep(~done)

    def _lane_changes(self, order):
        g = self.geometry
        keys = ((self.lane + 1) * _KEY_STRIDE + self.pos)[order]
        gains = self.gains
        best_lane, best_gain, best_nl, best_nf = _k.lane_changes(
            order, keys, self.lane, self.pos, self.speed, self.length, self.htarget, self.ctrl,
            self.vfactor, self.assertiveness, self.last_lc, self.clock, g.main_lane_count,
            g.merge_point, g.accel_lane_end, g.accel_lane_length, g.speed_limit_main,
            g.speed_limit_ramp, self.human_idm.vector, self.acc_safety.vector, gains.k_gap,
            gains.k_speed, self.lane_change_params.vector, self.dt)
        movers = np.flatnonzero(best_lane != self.lane)
        if movers.size == 0:
            return
        # at most one changer per target gap per step; the larger gain wins
        taken: dict[tuple, int] = {}
        for i in movers[np.argsort(-best_gain[movers], kind="stable")]:
            slot = (int(best_lane[i]), int(best_nl[i]), int(best_nf[i]))
            taken.setdefault(slot, int(i))
        winners = np.array(sorted(taken.values()), dtype=np.int64)
        self.lane[winners] = best_lane[winners]
        self.last_lc[winners] = self.clock

    # -- arrivals ----------------------------------------------------------------

    def spawn_arrivals(self, main_rate: float, ramp_rate: float, dt: float) -> None:
        """Draw Bernoulli arrivals for every lane, then insert queue heads that fit.

        ``main_rate`` applies to each main lane separately.
        The generator is consumed in a fixed pattern so that runs with equal
        seeds stay identical whatever the traffic state.
        """
        if main_rate < 0 or ramp_rate < 0:
            raise ValueError("arrival rates must be non-negative")
        g, d = self.geometry, self.demand
        rng = self.rng_streams["arrivals"]
        probs = [ramp_rate * dt / 3600.0] + [main_rate * dt / 3600.0] * g.main_lane_count
        draws = rng.random(len(probs))
        for q, (prob, u) in enumerate(zip(probs, draws)):
            if u < prob:
                equipped = rng.random() < d.penetration
                factor = float(np.clip(1.0 + d.speed_factor_sd * rng.standard_normal(), 0.8, 1.2))
                ctrl = d.controller if equipped else Controller.HUMAN
                self.queues[q].append((self.clock, int(ctrl), factor))
                self.spawned += 1
        for q, queue in enumerate(self.queues):
            if queue:
                self._try_insert(q - 1, queue)

    def _spawn_arrivals(self):
        self.spawn_arrivals(self.demand.main_rate / self.geometry.main_lane_count, self.demand.ramp_rate, self.dt)

    def _try_insert(self, lane: int, queue: list) -> None:
        g = self.geometry
        x0 = g.ramp_start if lane == RAMP_LANE else 0.0
        demand_time, ctrl, factor = queue[0]
        origin = Origin.RAMP if lane == RAMP_LANE else Origin.MAIN
        speed = self.free_speed_at(lane, x0, factor)
        in_lane = np.flatnonzero(self.lane == lane)
        if in_lane.size:
            last = in_lane[np.argmin(self.pos[in_lane])]
            gap = self.pos[last] - self.length[last] - x0
            if gap < MIN_HEADWAY:
                return
            budget = gap - SAFETY_MARGIN + stopping_distance(self.speed[last])
            speed = min(speed, max_safe_speed(budget))
        queue.pop(0)
        vid = self._next_id
        self._next_id += 1
        self._append(vid=vid, lane=lane, pos=x0, speed=speed, accel=0.0, length=VEHICLE_LENGTH,
                     htarget=self.initial_headway if ctrl != Controller.HUMAN else FALLBACK_HEADWAY,
                     ctrl=ctrl, origin=int(origin), vfactor=factor, entry_time=demand_time,
                     assertiveness=self.demand.assertiveness, fuel=0.0, forced=np.nan,
                     last_lc=-np.inf, bulletin=-1)
