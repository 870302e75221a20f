"""Runtime safety monitors over ground-truth trajectories.

Six constraint checks: obstacle clearance, intruder separation,
geofence containment, landing accuracy, minimum useful mission
duration, and a controllability envelope.  Monitors read truth state
only, never estimator output, so a corrupted belief cannot mask a
violation.  Per-tick checks emit at most one violation per constraint;
the landing and duration checks run once at the end of the run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .dynamics import RigidBodyState
from .guidance import MissionPhase
from .mathutil import Vec3, tilt_angle
from .stpa import TraceabilityGraph

# Constraint -> hazard, the pairing carried by every emitted violation.
CONSTRAINT_HAZARD = {f"SC-{i}": f"H-{i}" for i in range(1, 7)}


@dataclass(frozen=True)
class MonitorConfig:
    """Thresholds and geometry for the six constraint checks."""

    geofence: tuple[Vec3, Vec3] = ((-20.0, -20.0, 0.0), (20.0, 20.0, 25.0))
    zone_center: Vec3 = (0.0, 0.0, 0.0)
    zone_radius: float = 1.0
    obstacles: tuple[tuple[Vec3, float], ...] = (((8.0, 2.0, 1.0), 2.0),)
    intruder: tuple[tuple[float, Vec3], ...] = ()
    separation: float = 10.0
    tilt_limit: float = 1.0472          # rad, ~60 degrees
    rate_limit: float = 6.0             # rad/s
    min_duration: float = 10.0          # s of armed flight
    touchdown_radius: float = 1.0       # m, reported-accuracy threshold

    def __post_init__(self) -> None:
        lo, hi = self.geofence
        if any(l >= h for l, h in zip(lo, hi)):
            raise ValueError("geofence box must have min < max on every axis")
        positives = (
            self.zone_radius,
            self.separation,
            self.tilt_limit,
            self.rate_limit,
            self.touchdown_radius,
        )
        if any(v <= 0.0 for v in positives):
            raise ValueError("radii, separation, and limits must be positive")
        if any(c <= 0.0 for _, c in self.obstacles):
            raise ValueError("obstacle clearances must be positive")
        times = [t for t, _ in self.intruder]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("intruder trajectory times must strictly increase")

    def intruder_at(self, t: float) -> Optional[Vec3]:
        """Piecewise-linear intruder position, clamped at the ends."""
        traj = self.intruder
        if not traj:
            return None
        if t <= traj[0][0]:
            return traj[0][1]
        if t >= traj[-1][0]:
            return traj[-1][1]
        for (t0, p0), (t1, p1) in zip(traj, traj[1:]):
            if t0 <= t <= t1:
                a = (t - t0) / (t1 - t0)
                return (
                    p0[0] + a * (p1[0] - p0[0]),
                    p0[1] + a * (p1[1] - p0[1]),
                    p0[2] + a * (p1[2] - p0[2]),
                )
        return traj[-1][1]


@dataclass(frozen=True)
class Violation:
    time: float
    constraint: str
    hazard: str
    measured: float
    limit: float
    detail: str = ""


def _violation(t: float, constraint: str, measured: float, limit: float, detail: str) -> Violation:
    return Violation(
        time=t,
        constraint=constraint,
        hazard=CONSTRAINT_HAZARD[constraint],
        measured=measured,
        limit=limit,
        detail=detail,
    )


def check_step(
    truth: RigidBodyState,
    phase: MissionPhase,
    cfg: MonitorConfig,
    t: float,
) -> list[Violation]:
    """Per-tick checks: SC-1 obstacles, SC-2 intruder, SC-3 geofence,
    SC-6 controllability.  At most one violation per constraint."""
    out: list[Violation] = []
    px, py, pz = truth.position

    worst: Optional[tuple[float, float, Vec3]] = None
    for pos, clearance in cfg.obstacles:
        d = math.dist(truth.position, pos)
        if d < clearance and (worst is None or d < worst[0]):
            worst = (d, clearance, pos)
    if worst is not None:
        out.append(
            _violation(t, "SC-1", worst[0], worst[1], f"obstacle at {worst[2]}")
        )

    other = cfg.intruder_at(t)
    if other is not None:
        d = math.dist(truth.position, other)
        if d < cfg.separation:
            out.append(_violation(t, "SC-2", d, cfg.separation, "intruder separation"))

    lo, hi = cfg.geofence
    exceed = 0.0
    axis = -1
    bound = 0.0
    for i, (p, l, h) in enumerate(zip(truth.position, lo, hi)):
        if p < l and l - p > exceed:
            exceed, axis, bound = l - p, i, l
        if p > h and p - h > exceed:
            exceed, axis, bound = p - h, i, h
    if axis >= 0:
        out.append(
            _violation(
                t, "SC-3", truth.position[axis], bound, f"outside geofence on {'xyz'[axis]}"
            )
        )

    # Controllability is only meaningful in the air; a parked airframe
    # keeps its final attitude.
    airborne = not truth.landed and phase is not MissionPhase.TOUCHED_DOWN
    if airborne:
        tilt = tilt_angle(truth.attitude)
        rate = max(abs(r) for r in truth.body_rates)
        if tilt > cfg.tilt_limit:
            out.append(_violation(t, "SC-6", tilt, cfg.tilt_limit, "tilt envelope"))
        elif rate > cfg.rate_limit:
            out.append(_violation(t, "SC-6", rate, cfg.rate_limit, "rate envelope"))

    return out


@dataclass(frozen=True)
class FlightSummary:
    """What finalize needs to know about a completed run."""

    was_airborne: bool
    touchdown_point: Optional[Vec3]
    touchdown_time: Optional[float]
    armed_duration: float
    end_time: float


def finalize(summary: FlightSummary, cfg: MonitorConfig) -> list[Violation]:
    """End-of-run checks: SC-4 landing accuracy, SC-5 mission duration.

    A run that never left the ground cannot miss the pad, so SC-4 is
    exempt there; the short-mission check still applies.
    """
    out: list[Violation] = []
    if summary.was_airborne:
        if summary.touchdown_point is None:
            out.append(
                _violation(
                    summary.end_time, "SC-4", math.inf, cfg.zone_radius, "no touchdown achieved"
                )
            )
        else:
            dx = summary.touchdown_point[0] - cfg.zone_center[0]
            dy = summary.touchdown_point[1] - cfg.zone_center[1]
            miss = math.hypot(dx, dy)
            if miss > cfg.zone_radius:
                when = summary.touchdown_time if summary.touchdown_time is not None else summary.end_time
                out.append(
                    _violation(when, "SC-4", miss, cfg.zone_radius, "grounded outside landing zone")
                )
    if summary.armed_duration < cfg.min_duration:
        out.append(
            _violation(
                summary.end_time,
                "SC-5",
                summary.armed_duration,
                cfg.min_duration,
                "armed flight shorter than minimum useful duration",
            )
        )
    return out


@dataclass(frozen=True)
class ViolationRollup:
    hazards: dict[str, int]
    losses: dict[str, int]


def rollup(violations: list[Violation], graph: TraceabilityGraph) -> ViolationRollup:
    """Count violations per hazard and propagate to losses via the graph."""
    hazards: dict[str, int] = {}
    losses: dict[str, int] = {}
    for v in violations:
        if v.constraint not in graph.constraints:
            raise KeyError(f"unknown constraint id {v.constraint!r}")
        hz = graph.constraints[v.constraint].hazard
        hazards[hz] = hazards.get(hz, 0) + 1
        for loss in graph.hazards[hz].losses:
            losses[loss] = losses.get(loss, 0) + 1
    return ViolationRollup(hazards=hazards, losses=losses)
