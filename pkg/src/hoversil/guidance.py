"""Mission phase machine, reference generation, touchdown detection.

Covers the vertical take-off, a timed hover hold, and the descent onto
the fused pad estimate.  The touchdown detector is a joint
altitude/vertical-speed criterion with a persistence window; a separate
decision altitude (IR when fitted) guards it against belief biases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

from .controller import Reference
from .estimator import EstimatedUavState, LandingPadEstimate, SensorReadings
from .mathutil import Vec3, ZERO3


class MissionPhase(Enum):
    PRE_ARM = "PreArm"
    TAKE_OFF = "TakeOff"
    HOVER_HOLD = "HoverHold"
    DESCENT = "Descent"
    TOUCHED_DOWN = "TouchedDown"
    ABORTED = "Aborted"


_LEGAL_NEXT = {
    MissionPhase.PRE_ARM: (MissionPhase.TAKE_OFF, MissionPhase.ABORTED),
    MissionPhase.TAKE_OFF: (MissionPhase.HOVER_HOLD, MissionPhase.ABORTED),
    MissionPhase.HOVER_HOLD: (MissionPhase.DESCENT, MissionPhase.ABORTED),
    MissionPhase.DESCENT: (MissionPhase.TOUCHED_DOWN, MissionPhase.ABORTED),
    MissionPhase.TOUCHED_DOWN: (),
    MissionPhase.ABORTED: (),
}


def legal_transition(a: MissionPhase, b: MissionPhase) -> bool:
    return b is a or b in _LEGAL_NEXT[a]


@dataclass(frozen=True)
class MissionPlan:
    """Take-off, hold, land.  Pad nominally colocated with launch."""

    launch: Vec3 = ZERO3
    hover_altitude: float = 12.0
    hover_duration: float = 5.0
    climb_rate: float = 1.5
    descent_rate: float = 0.6
    pad_center: Vec3 = ZERO3
    lateral_rate: float = 0.5
    prearm_duration: float = 1.0
    abort_enabled: bool = True

    def __post_init__(self) -> None:
        if self.hover_altitude <= 0.0:
            raise ValueError("hover altitude must be positive")
        if self.descent_rate <= 0.0 or self.climb_rate <= 0.0:
            raise ValueError("ramp rates must be positive")


@dataclass(frozen=True)
class PhaseState:
    """Current phase, when it was entered, and whether the vehicle was
    on the ground at entry (distinguishes the two Aborted flavors)."""

    phase: MissionPhase = MissionPhase.PRE_ARM
    entered_at: float = 0.0
    on_ground: bool = True


@dataclass(frozen=True)
class GuidanceState:
    """Reference-generation state threaded by the harness."""

    phase: PhaseState = PhaseState()
    ref: Optional[Reference] = None
    target_xy: Optional[tuple[float, float]] = None
    ramp_z: float = 0.0
    had_fix: bool = False


def _slew2(current: tuple[float, float], target: tuple[float, float], limit: float) -> tuple[float, float]:
    dx = target[0] - current[0]
    dy = target[1] - current[1]
    d = math.hypot(dx, dy)
    if d <= limit:
        return target
    s = limit / d
    return (current[0] + dx * s, current[1] + dy * s)


def next_reference(
    gstate: GuidanceState,
    eus: EstimatedUavState,
    pad: Optional[LandingPadEstimate],
    plan: MissionPlan,
    t: float,
    dt: float,
) -> tuple[Reference, GuidanceState]:
    """Advance the phase machine one tick and emit the tracked reference.

    TakeOff ramps altitude above the launch point; HoverHold is a timer;
    Descent slews the horizontal setpoint toward the fused pad estimate
    (last known when fusion is silent, surveyed center before first
    fusion) while the vertical setpoint ramps down at the descent rate.
    """
    ps = gstate.phase
    phase = ps.phase

    if phase is MissionPhase.PRE_ARM:
        ref = Reference(position=(plan.launch[0], plan.launch[1], plan.launch[2]))
        if t - ps.entered_at >= plan.prearm_duration:
            ps = PhaseState(MissionPhase.TAKE_OFF, t, on_ground=False)
        return ref, replace(gstate, phase=ps, ref=ref, ramp_z=plan.launch[2])

    if phase is MissionPhase.TAKE_OFF:
        z = min(gstate.ramp_z + plan.climb_rate * dt, plan.launch[2] + plan.hover_altitude)
        ref = Reference(position=(plan.launch[0], plan.launch[1], z))
        if abs(eus.altitude - (plan.launch[2] + plan.hover_altitude)) <= 0.2:
            ps = PhaseState(MissionPhase.HOVER_HOLD, t, on_ground=False)
        return ref, replace(gstate, phase=ps, ref=ref, ramp_z=z)

    if phase is MissionPhase.HOVER_HOLD:
        # Hand-over may arrive with the climb ramp slightly short of the
        # hover altitude; finish it here rather than snapping.
        z = min(gstate.ramp_z + plan.climb_rate * dt, plan.launch[2] + plan.hover_altitude)
        ref = Reference(position=(plan.launch[0], plan.launch[1], z))
        if t - ps.entered_at >= plan.hover_duration:
            ps = PhaseState(MissionPhase.DESCENT, t, on_ground=False)
            return ref, GuidanceState(
                phase=ps, ref=ref,
                target_xy=(plan.launch[0], plan.launch[1]),
                ramp_z=z,
            )
        return ref, replace(gstate, phase=ps, ref=ref, ramp_z=z)

    if phase is MissionPhase.DESCENT:
        had_fix = gstate.had_fix or pad is not None
        if pad is not None:
            goal = (pad.position[0], pad.position[1])
        elif had_fix:
            # The estimate went stale, not the pad: hold the last
            # vision-informed course rather than snapping back to the
            # surveyed prior in a frame that has since drifted.
            goal = gstate.target_xy
        else:
            goal = (plan.pad_center[0], plan.pad_center[1])
        xy = _slew2(gstate.target_xy, goal, plan.lateral_rate * dt)
        z = max(gstate.ramp_z - plan.descent_rate * dt, 0.0)
        ref = Reference(position=(xy[0], xy[1], z))
        return ref, replace(gstate, ref=ref, target_xy=xy, ramp_z=z, had_fix=had_fix)

    # TouchedDown holds the last point; an airborne abort ramps the
    # reference down at the descent rate so the command stays continuous.
    last = gstate.ref or Reference(position=plan.launch)
    if phase is MissionPhase.ABORTED and not ps.on_ground:
        z = max(last.position[2] - plan.descent_rate * dt, 0.0)
    else:
        z = 0.0
    ref = Reference(position=(last.position[0], last.position[1], z))
    return ref, replace(gstate, ref=ref, ramp_z=z)


def declare_touchdown(gstate: GuidanceState, t: float) -> GuidanceState:
    ps = PhaseState(MissionPhase.TOUCHED_DOWN, t, on_ground=True)
    return replace(gstate, phase=ps)


def declare_abort(gstate: GuidanceState, t: float, on_ground: bool) -> GuidanceState:
    ps = PhaseState(MissionPhase.ABORTED, t, on_ground=on_ground)
    return replace(gstate, phase=ps)


@dataclass(frozen=True)
class TouchdownDetector:
    """Persistence window over the joint altitude/speed criterion."""

    alt_limit: float = 0.05
    vz_limit: float = 0.1
    hold_for: float = 0.3
    held_since: Optional[float] = None

    def update(
        self,
        eus: EstimatedUavState,
        readings: SensorReadings,
        secondary_altitude: bool,
        t: float,
    ) -> tuple[bool, "TouchdownDetector"]:
        """Return (touched, next detector state).

        Decision altitude prefers the IR reading when the secondary
        altitude mitigation is fitted and reporting, so a biased belief
        altitude can neither force nor mask a touchdown.
        """
        alt = eus.altitude
        if secondary_altitude and readings.ir is not None:
            alt = readings.ir
        ok = alt <= self.alt_limit and abs(eus.velocity[2]) <= self.vz_limit
        if not ok:
            return False, replace(self, held_since=None)
        since = self.held_since if self.held_since is not None else t
        return (t - since >= self.hold_for), replace(self, held_since=since)


def touchdown_detect(
    detector: TouchdownDetector,
    eus: EstimatedUavState,
    readings: SensorReadings,
    secondary_altitude: bool,
    t: float,
) -> tuple[bool, TouchdownDetector]:
    return detector.update(eus, readings, secondary_altitude, t)


def motor_cut(phase: PhaseState) -> bool:
    """Zero the actuators once landed (or aborted while on the ground)."""
    if phase.phase is MissionPhase.TOUCHED_DOWN:
        return True
    return phase.phase is MissionPhase.ABORTED and phase.on_ground
