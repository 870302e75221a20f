"""Parameterized fault injection on sensor, frame, and command channels.

Each fault is a windowed transformation of exactly one channel.  Two of
the kinds never touch a stream directly: TrimShift becomes a wind-field
step and GainScale rescales the controller gains at run setup;
OcclusionWindow and LightingLevel are parameters of the detection
renderer.  The bundled scenario library pairs fault sets with the
unsafe control actions they realize.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Mapping, Optional, Sequence

from .controller import ActuatorCommand
from .dynamics import MotorThrusts, RigidBodyState
from .estimator import CameraConfig, CameraFrame, MarkerDetection, SensorReadings
from .mathutil import Vec3, ZERO3, quat_rotate_inv, vnorm, vsub
from .stpa import TraceabilityGraph


class FaultKind(Enum):
    ALTITUDE_BELIEF_BIAS = "AltitudeBeliefBias"
    OCCLUSION_WINDOW = "OcclusionWindow"
    LIGHTING_LEVEL = "LightingLevel"
    SPOOF_MARKER = "SpoofMarker"
    FRAME_REORDER = "FrameReorder"
    FRAME_DELAY = "FrameDelay"
    COMMAND_DROPOUT = "CommandDropout"
    COMMAND_DELAY = "CommandDelay"
    TRIM_SHIFT = "TrimShift"
    GAIN_SCALE = "GainScale"
    POST_LANDING_EUS_BIAS = "PostLandingEusBias"


class Channel(Enum):
    SENSOR = "sensor"
    FRAME = "frame"
    COMMAND = "command"
    SETUP = "setup"
    RENDER = "render"


_CHANNEL = {
    FaultKind.ALTITUDE_BELIEF_BIAS: Channel.SENSOR,
    FaultKind.POST_LANDING_EUS_BIAS: Channel.SENSOR,
    FaultKind.SPOOF_MARKER: Channel.FRAME,
    FaultKind.FRAME_REORDER: Channel.FRAME,
    FaultKind.FRAME_DELAY: Channel.FRAME,
    FaultKind.COMMAND_DROPOUT: Channel.COMMAND,
    FaultKind.COMMAND_DELAY: Channel.COMMAND,
    FaultKind.TRIM_SHIFT: Channel.SETUP,
    FaultKind.GAIN_SCALE: Channel.SETUP,
    FaultKind.OCCLUSION_WINDOW: Channel.RENDER,
    FaultKind.LIGHTING_LEVEL: Channel.RENDER,
}


def channel_of(kind: FaultKind) -> Channel:
    return _CHANNEL[kind]


@dataclass(frozen=True)
class FaultSpec:
    """One fault kind, its parameters, and the active window [t0, t1].

    Unused parameters keep their defaults; __post_init__ checks only the
    ones the kind reads.
    """

    kind: FaultKind
    window: tuple[float, float]
    delta: float = 0.0                       # m, belief bias kinds
    fraction: float = 1.0                    # occlusion
    marker_ids: tuple[str, ...] = ()         # occlusion targets, () = every marker
    level: float = 1.0                       # lighting
    position: Vec3 = ZERO3                   # spoof marker, world
    size: float = 0.5                        # spoof marker side, m
    marker_id: str = "X0"                    # spoof marker tag
    depth: int = 2                           # reorder group length
    latency: float = 0.0                     # s, delay kinds
    policy: str = "zero"                     # dropout: zero | hold
    wind: Vec3 = ZERO3                       # m/s, trim shift
    factor: float = 1.0                      # gain scale

    def __post_init__(self) -> None:
        t0, t1 = self.window
        if not (math.isfinite(t0) and t0 < t1):
            raise ValueError(f"fault window must satisfy t0 < t1, got {self.window}")
        k = self.kind
        if k is FaultKind.OCCLUSION_WINDOW and not 0.0 <= self.fraction <= 1.0:
            raise ValueError(f"occlusion fraction {self.fraction} outside [0, 1]")
        if k is FaultKind.LIGHTING_LEVEL and not 0.0 <= self.level <= 1.0:
            raise ValueError(f"lighting level {self.level} outside [0, 1]")
        if k in (FaultKind.FRAME_DELAY, FaultKind.COMMAND_DELAY) and self.latency < 0.0:
            raise ValueError(f"latency {self.latency} must be >= 0")
        if k is FaultKind.FRAME_REORDER and self.depth < 2:
            raise ValueError(f"reorder depth {self.depth} must be >= 2")
        if k is FaultKind.SPOOF_MARKER and self.size <= 0.0:
            raise ValueError(f"spoof marker size {self.size} must be positive")
        if k is FaultKind.COMMAND_DROPOUT and self.policy not in ("zero", "hold"):
            raise ValueError(f"dropout policy {self.policy!r} not in ('zero', 'hold')")
        if k is FaultKind.GAIN_SCALE and self.factor <= 0.0:
            raise ValueError(f"gain factor {self.factor} must be positive")

    @property
    def channel(self) -> Channel:
        return _CHANNEL[self.kind]

    def active(self, t: float) -> bool:
        return self.window[0] <= t <= self.window[1]


def _require(fault: FaultSpec, channel: Channel, op: str) -> None:
    if fault.channel is not channel:
        raise ValueError(
            f"{fault.kind.value} is a {fault.channel.value}-channel fault, not accepted by {op}"
        )


def inject_sensor(fault: FaultSpec, readings: SensorReadings, t: float) -> SensorReadings:
    """Bias the altitude channel feeding the switch; identity outside the window.

    TrimShift is tolerated as a no-op because the harness routes it to
    the wind field, and PostLandingEusBias because it acts on the filter
    output (see eus_altitude_bias), not on any raw reading.
    """
    if fault.kind is FaultKind.TRIM_SHIFT:
        return readings
    _require(fault, Channel.SENSOR, "inject_sensor")
    if fault.kind is FaultKind.POST_LANDING_EUS_BIAS:
        return readings
    if not fault.active(t):
        return readings
    return replace(readings, baro=readings.baro + fault.delta)


def eus_altitude_bias(faults: Sequence[FaultSpec], t: float) -> float:
    """Net offset the active belief-channel faults add to the estimated altitude.

    Applied by the harness after the filter update, downstream of every
    sensor, so the corrupted altitude is what the touchdown logic and the
    source switch see while the controller still flies the true state
    estimate.
    """
    total = 0.0
    for fault in faults:
        if fault.kind is FaultKind.POST_LANDING_EUS_BIAS and fault.active(t):
            total += fault.delta
    return total


@dataclass(frozen=True)
class FramePipeState:
    """Held frames of one frame-channel fault instance."""

    held: tuple[CameraFrame, ...] = ()


def _spoof_detection(
    fault: FaultSpec, truth: RigidBodyState, cam: Optional[CameraConfig]
) -> Optional[MarkerDetection]:
    rel_world = vsub(fault.position, truth.position)
    rng_to = vnorm(rel_world)
    if rng_to <= 1e-9:
        return None
    rel_body = quat_rotate_inv(truth.attitude, rel_world)
    apparent = fault.size / rng_to
    if cam is not None:
        if -rel_body[2] / rng_to < math.cos(cam.fov_half_angle):
            return None
        if apparent < cam.resolvability:
            return None
    return MarkerDetection(
        marker_id=fault.marker_id,
        relative=rel_body,
        apparent_size=apparent,
        confidence=1.0,
    )


def inject_frames(
    fault: FaultSpec,
    frames: Sequence[CameraFrame],
    t: float,
    state: FramePipeState,
    truth: Optional[RigidBodyState] = None,
    cam: Optional[CameraConfig] = None,
) -> tuple[tuple[CameraFrame, ...], FramePipeState]:
    """Apply one frame-channel fault to the frames delivered at time t.

    FrameReorder buffers `depth` frames and emits the group reversed.
    FrameDelay holds each frame until capture + latency has elapsed
    (frames captured in the window are still released late after it).
    SpoofMarker appends a deterministic detection of the foreign marker
    computed from the vehicle pose, subject to the same field-of-view
    and resolvability gates as real markers when `cam` is given.
    """
    _require(fault, Channel.FRAME, "inject_frames")
    kind = fault.kind

    if kind is FaultKind.SPOOF_MARKER:
        if not fault.active(t) or truth is None:
            return tuple(frames), state
        det = _spoof_detection(fault, truth, cam)
        if det is None:
            return tuple(frames), state
        out = tuple(replace(f, detections=f.detections + (det,)) for f in frames)
        return out, state

    if kind is FaultKind.FRAME_REORDER:
        held = list(state.held)
        out: list[CameraFrame] = []
        if not fault.active(t):
            out = held + list(frames)
            held = []
        else:
            for f in frames:
                held.append(f)
                if len(held) == fault.depth:
                    out.extend(reversed(held))
                    held.clear()
        return tuple(out), FramePipeState(held=tuple(held))

    # FrameDelay
    held = list(state.held)
    out = []
    if fault.active(t):
        held.extend(frames)
    else:
        out.extend(frames)
    still: list[CameraFrame] = []
    for f in held:
        if f.timestamp + fault.latency <= t:
            out.append(f)
        else:
            still.append(f)
    out.sort(key=lambda f: f.timestamp)
    return tuple(out), FramePipeState(held=tuple(still))


@dataclass(frozen=True)
class CommandPipeState:
    """History of one command-channel fault instance."""

    queue: tuple[tuple[float, ActuatorCommand], ...] = ()
    held: Optional[ActuatorCommand] = None


def zeroed_command(cmd: ActuatorCommand) -> ActuatorCommand:
    return ActuatorCommand(
        thrusts=MotorThrusts(), surfaces=tuple(0.0 for _ in cmd.surfaces)
    )


def inject_commands(
    fault: FaultSpec,
    cmd: ActuatorCommand,
    t: float,
    state: CommandPipeState,
) -> tuple[ActuatorCommand, CommandPipeState]:
    """Apply one command-channel fault to the actuator command at time t.

    CommandDropout replaces the command per its policy inside the
    window.  CommandDelay records every command and, inside the window,
    outputs the one issued `latency` seconds ago (zero command if no
    history reaches back that far).
    """
    _require(fault, Channel.COMMAND, "inject_commands")

    if fault.kind is FaultKind.COMMAND_DROPOUT:
        if not fault.active(t):
            return cmd, replace(state, held=cmd)
        if fault.policy == "hold":
            return (state.held if state.held is not None else zeroed_command(cmd)), state
        return zeroed_command(cmd), state

    # CommandDelay keeps recording outside the window so the FIFO is
    # primed when the window opens.
    queue = state.queue + ((t, cmd),)
    if not fault.active(t):
        cut = t - fault.latency
        keep = [q for q in queue if q[0] >= cut]
        # retain one entry at or before the cut so t0's lookup resolves
        older = [q for q in queue if q[0] < cut]
        if older:
            keep.insert(0, older[-1])
        return cmd, CommandPipeState(queue=tuple(keep), held=state.held)
    # 1e-9 absorbs accumulated float error in tick stamps
    pick: Optional[tuple[float, ActuatorCommand]] = None
    for q in queue:
        if q[0] <= t - fault.latency + 1e-9:
            pick = q
        else:
            break
    if pick is None:
        return zeroed_command(cmd), CommandPipeState(queue=queue, held=state.held)
    keep = tuple(q for q in queue if q[0] >= pick[0])
    return pick[1], CommandPipeState(queue=keep, held=state.held)


def active_lighting(faults: Sequence[FaultSpec], t: float, base: float = 1.0) -> float:
    """Scene lighting at t: the dimmest active LightingLevel, else base."""
    level = base
    for f in faults:
        if f.kind is FaultKind.LIGHTING_LEVEL and f.active(t):
            level = min(level, f.level)
    return level


def active_occlusion(
    faults: Sequence[FaultSpec], t: float, marker_ids: Sequence[str]
) -> dict[str, float]:
    """Per-marker occluded fraction at t (max across active faults)."""
    occ: dict[str, float] = {}
    for f in faults:
        if f.kind is not FaultKind.OCCLUSION_WINDOW or not f.active(t):
            continue
        targets = f.marker_ids if f.marker_ids else tuple(marker_ids)
        for mid in targets:
            occ[mid] = max(occ.get(mid, 0.0), f.fraction)
    return occ


def wind_schedule(faults: Sequence[FaultSpec]) -> tuple[tuple[float, float, Vec3], ...]:
    """TrimShift faults as (t_on, t_off, velocity) wind-field steps."""
    return tuple(
        (f.window[0], f.window[1], f.wind)
        for f in faults
        if f.kind is FaultKind.TRIM_SHIFT
    )


def gain_factor(faults: Sequence[FaultSpec]) -> float:
    """Combined controller-gain scale; applied for the whole run."""
    factor = 1.0
    for f in faults:
        if f.kind is FaultKind.GAIN_SCALE:
            factor *= f.factor
    return factor


MITIGATION_FLAGS = (
    "secondary_altitude",
    "multi_marker",
    "tagging",
    "sequence_guard",
    "adaptive",
    "frame_rate_opt",
    "preflight_occlusion_check",
    "lighting_gate",
)


@dataclass(frozen=True)
class ScenarioSpec:
    """A named fault set tied to the unsafe control actions it realizes."""

    id: str
    uca_ids: tuple[str, ...]
    faults: tuple[FaultSpec, ...]
    mitigations: tuple[str, ...] = ()
    narrative: str = ""

    def __post_init__(self) -> None:
        for flag in self.mitigations:
            if flag not in MITIGATION_FLAGS:
                raise ValueError(f"unknown mitigation flag {flag!r}")


def check_scenario(spec: ScenarioSpec, graph: TraceabilityGraph) -> None:
    """Raise if a linked unsafe control action is absent from the graph."""
    for uid in spec.uca_ids:
        if uid not in graph.ucas:
            raise ValueError(f"scenario {spec.id} links unknown UCA {uid!r}")


def scenario_library() -> tuple[ScenarioSpec, ...]:
    """The eight bundled loss scenarios, one per unsafe control action.

    Windows assume the default mission timeline: one second of pre-arm,
    climb to 12 m, a 5 s hold, then a 0.6 m/s descent onto a pad 3.6 m
    from the launch point, touching down near t = 34 s.
    """
    run = (0.0, 60.0)
    return (
        ScenarioSpec(
            id="S-UCA1",
            uca_ids=("UCA-1",),
            faults=(
                FaultSpec(FaultKind.ALTITUDE_BELIEF_BIAS, run, delta=-5.0),
                FaultSpec(FaultKind.OCCLUSION_WINDOW, run, fraction=1.0, marker_ids=("M0",)),
                FaultSpec(FaultKind.LIGHTING_LEVEL, run, level=0.45),
            ),
            mitigations=("multi_marker", "secondary_altitude"),
            narrative=(
                "Low light and a covered primary marker deny the pad fix while "
                "the altitude belief reads five meters low; final descent is "
                "released blind and the motors cut well above the surface."
            ),
        ),
        ScenarioSpec(
            id="S-UCA2",
            uca_ids=("UCA-2",),
            faults=(
                FaultSpec(FaultKind.ALTITUDE_BELIEF_BIAS, run, delta=3.0),
                FaultSpec(
                    FaultKind.SPOOF_MARKER,
                    run,
                    position=(4.5, 2.0, 0.0),
                    size=0.8,
                    marker_id="X9",
                ),
            ),
            mitigations=("tagging",),
            narrative=(
                "A large foreign marker sits 1.5 m from the pad; untagged "
                "detections drag the fused pad estimate toward the impostor "
                "while the altitude belief reads high."
            ),
        ),
        ScenarioSpec(
            id="S-UCA3",
            uca_ids=("UCA-3",),
            faults=(FaultSpec(FaultKind.FRAME_REORDER, (10.0, 40.0), depth=2),),
            mitigations=("sequence_guard",),
            narrative=(
                "The vision pipeline delivers pad fixes pairwise out of order, "
                "so stale detections overwrite newer ones during the approach."
            ),
        ),
        ScenarioSpec(
            id="S-UCA4",
            uca_ids=("UCA-4",),
            faults=(
                FaultSpec(FaultKind.OCCLUSION_WINDOW, (18.0, 60.0), fraction=1.0, marker_ids=("M0",)),
                FaultSpec(FaultKind.ALTITUDE_BELIEF_BIAS, (18.0, 60.0), delta=-1.5),
            ),
            mitigations=("multi_marker", "secondary_altitude"),
            narrative=(
                "The primary marker drops out mid-descent, freezing the pad "
                "estimate while position drift accumulates and the altitude "
                "belief sags."
            ),
        ),
        ScenarioSpec(
            id="S-UCA5",
            uca_ids=("UCA-5",),
            faults=(FaultSpec(FaultKind.COMMAND_DROPOUT, (15.5, 16.7), policy="zero"),),
            mitigations=(),
            narrative=(
                "Motor commands stop for over a second early in the transit "
                "to the pad; the vehicle falls too far to arrest the drop "
                "and grounds short."
            ),
        ),
        ScenarioSpec(
            id="S-UCA6",
            uca_ids=("UCA-6",),
            faults=(
                FaultSpec(FaultKind.TRIM_SHIFT, (10.0, 60.0), wind=(3.0, 0.0, -1.0)),
                FaultSpec(FaultKind.GAIN_SCALE, (10.0, 60.0), factor=0.55),
            ),
            mitigations=("adaptive",),
            narrative=(
                "A steady wind step arrives while the control gains are "
                "detuned, leaving a standing tracking error through the hold "
                "and descent."
            ),
        ),
        ScenarioSpec(
            id="S-UCA7",
            uca_ids=("UCA-7",),
            faults=(FaultSpec(FaultKind.POST_LANDING_EUS_BIAS, (20.0, 60.0), delta=0.5),),
            mitigations=("secondary_altitude",),
            narrative=(
                "After ground contact the altitude belief stays half a meter "
                "high, so touchdown is never declared and the motors keep "
                "thrusting against the ground."
            ),
        ),
        ScenarioSpec(
            id="S-UCA8",
            uca_ids=("UCA-8",),
            faults=(FaultSpec(FaultKind.COMMAND_DELAY, (12.0, 17.0), latency=0.5),),
            mitigations=(),
            narrative=(
                "Motor commands arrive half a second late, destabilizing the "
                "fast attitude loops during the hold."
            ),
        ),
    )
