"""Run metrics: speeds, delays, a fuel proxy, space-time grids and decision latency.

Every aggregate here is a pure function of logs the simulation exports, so the
tests recompute each one by brute force from the same logs.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING, Callable, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:
    from .road_world import RoadGeometry, TripRecord, World

# Polynomial fuel proxy (per second; integrate with dt).  Relative comparisons only.
BETA0 = 0.1
BETA1 = 0.01
BETA2 = 0.00003
BETA3 = 0.08

CONTROLLER_NAMES = {0: "dacc", 1: "fixed", 2: "threshold", 3: "human"}


def fuel_rate(v, a):
    """Instantaneous consumption; braking adds nothing beyond the speed terms."""
    v = np.asarray(v, dtype=float)
    a = np.asarray(a, dtype=float)
    rate = BETA0 + BETA1 * v + BETA2 * v ** 3 + BETA3 * np.maximum(a, 0.0) * v
    out = np.maximum(rate, BETA0)
    return float(out) if out.ndim == 0 else out


def fuel_proxy(speed_trace: Sequence[float], accel_trace: Sequence[float], dt: float = 0.1) -> float:
    """Integrate :func:`fuel_rate` over aligned speed/acceleration traces."""
    v = np.asarray(speed_trace, dtype=float)
    a = np.asarray(accel_trace, dtype=float)
    if v.shape != a.shape:
        raise ValueError("speed and acceleration traces must be aligned")
    return float(np.sum(fuel_rate(v, a)) * dt)


@dataclass
class SampleLog:
    """Per-vehicle samples (t, x, v, lane, controller) taken once per action interval."""

    t: list = field(default_factory=list)
    x: list = field(default_factory=list)
    v: list = field(default_factory=list)
    lane: list = field(default_factory=list)
    ctrl: list = field(default_factory=list)

    def record(self, world: "World") -> None:
        n = world.n
        self.t.append(np.full(n, world.clock))
        self.x.append(world.pos.copy())
        self.v.append(world.speed.copy())
        self.lane.append(world.lane.copy())
        self.ctrl.append(world.ctrl.copy())

    def arrays(self) -> dict[str, np.ndarray]:
        def cat(parts, dtype):
            return np.concatenate(parts).astype(dtype) if parts else np.zeros(0, dtype=dtype)
        return {"t": cat(self.t, float), "x": cat(self.x, float), "v": cat(self.v, float),
                "lane": cat(self.lane, np.int64), "ctrl": cat(self.ctrl, np.int64)}

    def to_csv(self, path) -> None:
        a = self.arrays()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "v", "lane", "controller"])
            for row in zip(a["t"], a["x"], a["v"], a["lane"], a["ctrl"]):
                w.writerow([f"{row[0]:.1f}", repr(float(row[1])), repr(float(row[2])), int(row[3]), int(row[4])])


def _window_mask(t, window):
    lo, hi = window if window is not None else (-math.inf, math.inf)
    return (t >= lo) & (t <= hi)


def avg_speed(samples: SampleLog, window: tuple[float, float] | None = None,
              controller: int | None = None) -> float | None:
    """Mean over vehicles and sample times; ``None`` when nothing was sampled."""
    a = samples.arrays()
    mask = _window_mask(a["t"], window)
    if controller is not None:
        mask &= a["ctrl"] == controller
    if not np.any(mask):
        return None
    return float(np.mean(a["v"][mask]))


def trip_delays(trips: Iterable["TripRecord"], geometry: "RoadGeometry") -> np.ndarray:
    free = {0: geometry.free_flow_time(0), 1: geometry.free_flow_time(1)}
    return np.array([max(tr.exit_time - tr.entry_time - free[tr.origin], 0.0) for tr in trips])


def avg_delay(completed_trips: Sequence["TripRecord"], window: tuple[float, float] | None,
              geometry: "RoadGeometry", controller: int | None = None) -> float | None:
    """Mean per-trip delay over trips finishing inside ``window``; ``None`` if there are none."""
    lo, hi = window if window is not None else (-math.inf, math.inf)
    trips = [tr for tr in completed_trips if lo <= tr.exit_time <= hi
             and (controller is None or tr.controller == controller)]
    if not trips:
        return None
    return float(np.mean(trip_delays(trips, geometry)))


@dataclass
class SpaceTimeGrid:
    """Mean speed per (space bin, time bin); NaN marks empty cells."""

    speed: np.ndarray
    cell_x: float
    cell_t: float

    def to_csv(self, path) -> None:
        rows, cols = self.speed.shape
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x_m"] + [f"{c * self.cell_t:g}" for c in range(cols)])
            for r in range(rows):
                w.writerow([f"{r * self.cell_x:g}"]
                           + ["" if math.isnan(val) else f"{val:.4f}" for val in self.speed[r]])


def space_time_grid(samples: SampleLog, geometry: "RoadGeometry", cell_x: float = 10.0,
                    cell_t: float = 1.0, main_only: bool = True) -> SpaceTimeGrid:
    a = samples.arrays()
    keep = (a["x"] >= 0) & (a["x"] < geometry.segment_length)
    if main_only:
        keep &= a["lane"] >= 0
    rows = int(math.ceil(geometry.segment_length / cell_x))
    # the small offset keeps sample times like 2.9999999 in bin 3
    col = np.floor(a["t"] / cell_t + 1e-9).astype(np.int64)
    cols = int(col.max()) + 1 if col.size else 1
    r = np.floor(a["x"][keep] / cell_x).astype(np.int64)
    c = col[keep]
    total = np.zeros((rows, cols))
    count = np.zeros((rows, cols))
    np.add.at(total, (r, c), a["v"][keep])
    np.add.at(count, (r, c), 1)
    with np.errstate(invalid="ignore"):
        mean = np.where(count > 0, total / count, np.nan)
    return SpaceTimeGrid(mean, cell_x, cell_t)


@dataclass
class LatencySummary:
    mean_ms: float
    p50_ms: float
    p95_ms: float
    max_ms: float
    n: int
    samples_ms: list = field(default_factory=list, repr=False)


def decision_latency(decide: Callable[[], object], n_trials: int = 100) -> LatencySummary:
    """Time ``decide`` (featurize + forward + select, end to end) ``n_trials`` times."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    ms = []
    for _ in range(n_trials):
        t0 = time.perf_counter_ns()
        decide()
        ms.append((time.perf_counter_ns() - t0) / 1e6)
    arr = np.array(ms)
    return LatencySummary(float(arr.mean()), float(np.percentile(arr, 50)),
                          float(np.percentile(arr, 95)), float(arr.max()), n_trials, ms)


REPORT_COLUMNS = ("avg_speed", "avg_delay", "avg_fuel", "completed", "queued", "on_road", "spawned")


@dataclass
class RunReport:
    avg_speed: float | None
    avg_delay: float | None
    avg_fuel: float | None
    completed: int
    queued: int
    on_road: int
    spawned: int
    per_controller: dict = field(default_factory=dict)
    space_time_grid: SpaceTimeGrid | None = None
    decision_latency: LatencySummary | None = None

    def row(self) -> dict:
        return {k: getattr(self, k) for k in REPORT_COLUMNS}

    def to_json(self) -> str:
        d = {k: getattr(self, k) for k in REPORT_COLUMNS}
        d["per_controller"] = self.per_controller
        if self.decision_latency is not None:
            lat = asdict(self.decision_latency)
            lat.pop("samples_ms")
            d["decision_latency"] = lat
        return json.dumps(d, sort_keys=True)

    def to_csv_row(self) -> str:
        buf = io.StringIO()
        csv.writer(buf).writerow(["" if v is None else v for v in self.row().values()])
        return buf.getvalue()


def build_report(world: "World", samples: SampleLog, window: tuple[float, float],
                 grid: bool = False, latency: LatencySummary | None = None) -> RunReport:
    g = world.geometry
    trips = [tr for tr in world.completed_trips if window[0] <= tr.exit_time <= window[1]]
    per = {}
    for code, name in CONTROLLER_NAMES.items():
        n_trips = sum(1 for tr in world.completed_trips if tr.controller == code)
        speed = avg_speed(samples, window, code)
        if speed is None and n_trips == 0:
            continue
        per[name] = {"avg_speed": speed, "avg_delay": avg_delay(world.completed_trips, window, g, code),
                     "completed": n_trips}
    return RunReport(
        avg_speed=avg_speed(samples, window),
        avg_delay=avg_delay(world.completed_trips, window, g),
        avg_fuel=float(np.mean([tr.fuel for tr in trips])) if trips else None,
        completed=len(world.completed_trips),
        queued=world.queued,
        on_road=world.n,
        spawned=world.spawned,
        per_controller=per,
        space_time_grid=space_time_grid(samples, g) if grid else None,
        decision_latency=latency,
    )
