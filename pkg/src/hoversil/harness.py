"""Closed-loop runner: seeded single runs, the scenario/mitigation
matrix, and deterministic report emission.

One run wires the full loop: truth dynamics under wind, sensor
simulation, fault injection on every interface, marker rendering and
fusion, altitude-source switching, the state estimator, mission
guidance with touchdown detection, the cascaded controller with
optional disturbance-observer augmentation, control allocation, and
the runtime safety monitors.  Everything downstream of the seed is
deterministic: same config + same seed = same bytes out.

Tick order is part of the contract (re-running a recorded scenario
must replay bit-exactly), so each stage appends a tag to an order
trace on the first tick when debugging is on; tests pin the sequence.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import RunConfig
from .controller import (
    ActuatorCommand,
    ControllerState,
    FlightMode,
    adaptive_augment,
    allocate,
    cascade_step,
    schedule,
)
from .dynamics import RigidBodyState, WindField, step
from .estimator import (
    AltitudeSource,
    LandingPadEstimate,
    fuse_pad_position,
    guard_sequence,
    initial_eus,
    render_detections,
    simulate_sensors,
    switch_source,
    update_eus,
)
from .faults import (
    Channel,
    CommandPipeState,
    FramePipeState,
    active_lighting,
    active_occlusion,
    eus_altitude_bias,
    gain_factor,
    inject_commands,
    inject_frames,
    inject_sensor,
    wind_schedule,
    zeroed_command,
)
from .guidance import (
    GuidanceState,
    MissionPhase,
    TouchdownDetector,
    declare_abort,
    declare_touchdown,
    motor_cut,
    next_reference,
    touchdown_detect,
)
from .mathutil import clamp, quat_rotate
from .monitors import FlightSummary, Violation, check_step, finalize, rollup
from .stpa import load_bundled_model


class HarnessError(RuntimeError):
    """A run or matrix failed; the message carries the failing row."""


# The interface order of one tick.  check_step runs between dynamics
# and sensing but is not an interface stage, so it carries no tag.
TICK_ORDER = (
    "wind",
    "dynamics",
    "sensors",
    "inject_sensor",
    "render",
    "inject_frames",
    "guard",
    "fuse",
    "switch",
    "update_eus",
    "guidance",
    "cascade",
    "adaptive",
    "allocate",
    "schedule",
    "inject_commands",
)

# Thrust above this after settling on the ground counts as a
# post-touchdown actuation event; well below hover trim (14.7 N) and
# well above allocator numerical dust.
_GROUND_THRUST_LIMIT = 0.5
# Grace after first ground contact before the count starts, so a
# normal detector hold (0.3 s) never registers.
# Fallback stop deadline for runs that never declare touchdown.  A timely
# declaration trails contact by the vision staleness window plus observer
# settling plus the detector hold, about a second in total.
_GROUND_GRACE = 1.5


@dataclass(frozen=True)
class Sample:
    """One decimated telemetry row (end-of-tick values)."""

    t: float
    position: tuple
    velocity: tuple
    tilt: float
    eus_position: tuple
    altitude: float
    source: str
    phase: str
    collective: float


@dataclass(frozen=True)
class TriggerRecord:
    """Activity log of one injected fault over the run."""

    kind: str
    window: tuple
    uca_ids: tuple
    active_ticks: int
    first_active: Optional[float]
    last_active: Optional[float]


@dataclass(frozen=True)
class RunReport:
    """Everything a run leaves behind.

    violations keeps the first occurrence per constraint; rates and
    rollups only care whether a constraint tripped, and a sustained
    breach would otherwise dominate the report.
    """

    seed: int
    scenario: Optional[str]
    mitigations: tuple
    dt: float
    decimation: int
    end_time: float
    samples: tuple
    violations: tuple
    landing_error: Optional[float]
    touchdown_time: Optional[float]
    contact_time: Optional[float]
    contact_point: Optional[tuple]
    armed_duration: float
    post_touchdown_thrust_ticks: int
    spoof_fusions: int
    fused_monotone: bool
    mean_pad_error: Optional[float]
    hover_alt_error: Optional[float]
    hazard_counts: dict
    loss_counts: dict
    triggers: tuple
    abort_reason: Optional[str]
    order_trace: tuple = ()

    def violated(self, constraint: str) -> bool:
        return any(v.constraint == constraint for v in self.violations)


def _tilt(attitude) -> float:
    zb = quat_rotate(attitude, (0.0, 0.0, 1.0))
    return math.acos(clamp(zb[2], -1.0, 1.0))


def run(cfg: RunConfig, debug_order: bool = False) -> RunReport:
    """Execute one seeded closed-loop run to completion.

    Terminates two seconds after a declared touchdown, when an abort
    has the vehicle on the ground, or at the configured duration.
    """
    graph = load_bundled_model()
    scen = cfg.scenario_spec()
    faults = cfg.resolved_faults()
    mits = frozenset(cfg.mitigations)
    n_scen_faults = len(scen.faults) if scen is not None else 0

    # Setup-channel routing: whole-run gain scale, wind-field steps.
    gains = cfg.gains.scaled(gain_factor(faults))
    wind = WindField()
    for t_on, t_off, vel in wind_schedule(faults):
        wind = wind.plus_step(t_on, t_off, vel)

    cam = cfg.camera
    if "frame_rate_opt" in mits:
        cam = replace(
            cam,
            capture_rate=cam.capture_rate * 2.0,
            latency=cam.latency / 2.0,
            queue_depth=1,
        )
    layout = cfg.layout if "multi_marker" in mits else cfg.layout.primary_only()
    active_ids = tuple(m.id for m in layout.markers)
    known_ids = frozenset(m.id for m in cfg.layout.markers)
    noise = cfg.noise
    if "secondary_altitude" in mits:
        noise = replace(noise, ir_enabled=True, ir_beacon=cfg.layout.center)

    sensor_faults = tuple(f for f in faults if f.channel is Channel.SENSOR)
    frame_pipes = [(f, FramePipeState()) for f in faults if f.channel is Channel.FRAME]
    command_pipes = [(f, CommandPipeState()) for f in faults if f.channel is Channel.COMMAND]

    # One splittable stream; child order is part of the contract.
    ss = np.random.SeedSequence(cfg.seed)
    children = ss.spawn(5)
    rng_sensor = np.random.default_rng(children[0])
    rng_bias = np.random.default_rng(children[1])
    rng_camera = np.random.default_rng(children[2])
    _ = children[3]  # faults (reserved)
    _ = children[4]  # reserved

    b = rng_bias.standard_normal(2)
    bias_x = cfg.gps_bias_init * b[0]
    bias_y = cfg.gps_bias_init * b[1]
    walk_step = cfg.gps_bias_walk * math.sqrt(cfg.dt)

    truth = RigidBodyState(position=cfg.plan.launch)
    noise_t = replace(noise, gps_bias=(bias_x, bias_y, 0.0))
    eus = initial_eus(simulate_sensors(truth, noise_t, rng_sensor), cfg.estimator)
    source = eus.source
    gstate = GuidanceState()
    cstate = ControllerState()
    detector = TouchdownDetector()
    cmd = ActuatorCommand()
    pad_est: Optional[LandingPadEstimate] = None
    guard_last: tuple = (-math.inf, -1)
    pending: list = []  # (deliver_at, frame), capture order
    next_capture = 0.0
    seq = 0

    abort_reason: Optional[str] = None
    if "lighting_gate" in mits:
        if active_lighting(faults, 0.0, cfg.lighting) < cfg.lighting_floor:
            abort_reason = "preflight lighting below floor"
    if abort_reason is None and "preflight_occlusion_check" in mits:
        occ0 = active_occlusion(faults, 0.0, tuple(m.id for m in cfg.layout.markers))
        if any(v > 0.0 for v in occ0.values()):
            abort_reason = "preflight marker occlusion"
    if abort_reason is not None:
        gstate = declare_abort(gstate, 0.0, on_ground=True)

    n_ticks = int(round(cfg.duration / cfg.dt))
    violations: list = []
    seen_constraints: set = set()
    samples: list = []
    trace: list = []

    trig_ticks = [0] * len(faults)
    trig_first: list = [None] * len(faults)
    trig_last: list = [None] * len(faults)

    was_airborne = False
    contact_time: Optional[float] = None
    contact_point: Optional[tuple] = None
    touchdown_time: Optional[float] = None
    armed_duration = 0.0
    declared_thrust_ticks = 0
    grace_thrust_ticks = 0
    gps_gated = False
    spoof_fusions = 0
    fused_monotone = True
    last_fused_ts = -math.inf
    pad_err_sum = 0.0
    pad_err_count = 0
    hover_errs: list = []
    hover_z = cfg.plan.launch[2] + cfg.plan.hover_altitude
    pad_true = cfg.layout.center

    dt = cfg.dt
    for k in range(n_ticks):
        first = k == 0 and debug_order

        # wind/faults: bias walk advances, fault activity is logged.
        if first:
            trace.append("wind")
        b = rng_bias.standard_normal(2)
        bias_x += walk_step * b[0]
        bias_y += walk_step * b[1]
        t_now = truth.time + dt
        for i, f in enumerate(faults):
            if f.active(t_now):
                trig_ticks[i] += 1
                if trig_first[i] is None:
                    trig_first[i] = t_now
                trig_last[i] = t_now

        if first:
            trace.append("dynamics")
        prev_velocity = truth.velocity
        truth = step(truth, cmd.thrusts, wind, cfg.vehicle, dt)
        t_now = truth.time
        accel_world = (
            (truth.velocity[0] - prev_velocity[0]) / dt,
            (truth.velocity[1] - prev_velocity[1]) / dt,
            (truth.velocity[2] - prev_velocity[2]) / dt,
        )
        if truth.position[2] > 0.05:
            was_airborne = True
        if was_airborne and truth.landed and contact_time is None:
            contact_time = t_now
            contact_point = truth.position

        for v in check_step(truth, gstate.phase.phase, cfg.monitors, t_now):
            if v.constraint not in seen_constraints:
                seen_constraints.add(v.constraint)
                violations.append(v)

        if first:
            trace.append("sensors")
        noise_t = replace(noise, gps_bias=(bias_x, bias_y, 0.0))
        readings = simulate_sensors(truth, noise_t, rng_sensor, accel_world)

        if first:
            trace.append("inject_sensor")
        for f in sensor_faults:
            readings = inject_sensor(f, readings, t_now)

        # Once the approach drops below the switch threshold the filter
        # stops taking the receiver for xy: near the ground the fix is the
        # least trustworthy input, and letting it back in mid-approach
        # would drag the belief off the pad-relative frame by whatever
        # bias it has accumulated.  Short gaps coast on inertia instead.
        if not gps_gated:
            decision_alt = readings.ir if readings.ir is not None else eus.altitude
            if (
                gstate.phase.phase is MissionPhase.DESCENT
                and decision_alt < cfg.estimator.switch_threshold
            ):
                gps_gated = True
        elif gstate.phase.phase is MissionPhase.ABORTED:
            gps_gated = False
        if gps_gated:
            readings = replace(readings, gps_valid=False)

        if first:
            trace.append("render")
        if t_now + 1e-9 >= next_capture:
            lighting = active_lighting(faults, t_now, base=cfg.lighting)
            occ = active_occlusion(faults, t_now, active_ids)
            frame = render_detections(
                truth, layout, cam, lighting, occ, rng_camera, t_now, seq
            )
            seq += 1
            pending.append((t_now + cam.latency, frame))
            if len(pending) > cam.queue_depth:
                pending.pop(0)
            next_capture += 1.0 / cam.capture_rate

        if first:
            trace.append("inject_frames")
        delivered = tuple(fr for due, fr in pending if due <= t_now + 1e-9)
        pending = [(due, fr) for due, fr in pending if due > t_now + 1e-9]
        for i, (ffault, fstate) in enumerate(frame_pipes):
            delivered, fstate = inject_frames(
                ffault, delivered, t_now, fstate, truth=truth, cam=cam
            )
            frame_pipes[i] = (ffault, fstate)

        if first:
            trace.append("guard")
        if "sequence_guard" in mits:
            accepted = []
            for fr in delivered:
                if guard_sequence(fr, guard_last).accepted:
                    accepted.append(fr)
                    guard_last = (fr.timestamp, fr.seq)
        else:
            accepted = list(delivered)

        if first:
            trace.append("fuse")
        pad_event: Optional[LandingPadEstimate] = None
        for fr in accepted:
            est = fuse_pad_position(fr, layout, eus, tagging="tagging" in mits)
            if est is None:
                continue
            pad_event = est
            pad_est = est
            if est.timestamp <= last_fused_ts:
                fused_monotone = False
            last_fused_ts = est.timestamp
            if any(mid not in known_ids for mid in est.marker_ids):
                spoof_fusions += 1
            # Accuracy is scored on the approach, where the estimate is
            # actually steering; climb-phase sightings at the edge of the
            # field of view would only dilute the comparison.  The fix is
            # vehicle-relative geometry, so judge it in that frame: an
            # absolute comparison would be blind to pulls the filter
            # absorbs into its own position belief.
            if gstate.phase.phase is MissionPhase.DESCENT:
                est_rel = (est.position[0] - eus.position[0], est.position[1] - eus.position[1])
                true_rel = (pad_true[0] - truth.position[0], pad_true[1] - truth.position[1])
                pad_err_sum += math.hypot(
                    est_rel[0] - true_rel[0], est_rel[1] - true_rel[1]
                )
                pad_err_count += 1

        fresh = pad_est
        if fresh is not None and t_now - fresh.timestamp > cfg.estimator.vision_stale_after:
            fresh = None

        if first:
            trace.append("switch")
        # Pad-relative navigation is armed for the approach only.  During
        # the climb the markers sit at the edge of the field of view, and
        # letting those noisy intermittent sightings toggle the source
        # would kick the position belief around for nothing.
        on_approach = gstate.phase.phase is MissionPhase.DESCENT
        source = switch_source(
            eus.altitude,
            cfg.estimator.switch_threshold,
            fresh if on_approach else None,
            readings.ir,
            prev=source,
            band=cfg.estimator.switch_band,
        )

        if first:
            trace.append("update_eus")
        eus = update_eus(readings, pad_event, source, eus, dt, cfg.estimator)
        belief_bias = eus_altitude_bias(sensor_faults, t_now)
        if belief_bias != 0.0:
            eus = replace(eus, altitude=eus.altitude + belief_bias)

        if first:
            trace.append("guidance")
        ref, gstate = next_reference(gstate, eus, fresh, cfg.plan, t_now, dt)
        if gstate.phase.phase is MissionPhase.DESCENT and touchdown_time is None:
            touched, detector = touchdown_detect(
                detector, eus, readings, "secondary_altitude" in mits, t_now
            )
            if touched:
                gstate = declare_touchdown(gstate, t_now)
                touchdown_time = t_now
        cut = gstate.phase.phase is MissionPhase.PRE_ARM or motor_cut(gstate.phase)
        if not cut:
            armed_duration += dt
        if gstate.phase.phase is MissionPhase.HOVER_HOLD:
            hover_errs.append((t_now, abs(truth.position[2] - hover_z)))

        if first:
            trace.append("cascade")
        collective, torque, cstate = cascade_step(ref, eus, gains, cfg.vehicle, cstate, dt)

        if first:
            trace.append("adaptive")
        collective, torque, cstate = adaptive_augment(
            cstate, eus, (collective, torque), gains, cfg.vehicle, dt,
            enabled="adaptive" in mits,
        )

        if first:
            trace.append("allocate")
        thrusts, _saturated = allocate(collective, torque, cfg.vehicle)

        if first:
            trace.append("schedule")
        cmd = schedule(ActuatorCommand(thrusts=thrusts), FlightMode.HOVER)
        if cut:
            cmd = zeroed_command(cmd)

        if first:
            trace.append("inject_commands")
        for i, (cfault, cpstate) in enumerate(command_pipes):
            cmd, cpstate = inject_commands(cfault, cmd, t_now, cpstate)
            command_pipes[i] = (cfault, cpstate)

        # Thrust is hazardous once the vehicle was told to stop.  Which
        # deadline applies is only known at the end (a late declaration
        # legitimizes the shutdown lag before it), so count against both
        # and let the report pick.
        if cmd.thrusts.total > _GROUND_THRUST_LIMIT:
            if touchdown_time is not None and t_now > touchdown_time:
                declared_thrust_ticks += 1
            if contact_time is not None and t_now > contact_time + _GROUND_GRACE:
                grace_thrust_ticks += 1

        if k % cfg.decimation == 0:
            samples.append(
                Sample(
                    t=t_now,
                    position=truth.position,
                    velocity=truth.velocity,
                    tilt=_tilt(truth.attitude),
                    eus_position=eus.position,
                    altitude=eus.altitude,
                    source=source.value,
                    phase=gstate.phase.phase.value,
                    collective=cmd.thrusts.total,
                )
            )

        if touchdown_time is not None and t_now >= touchdown_time + 2.0 - 1e-9:
            break
        if (
            gstate.phase.phase is MissionPhase.ABORTED
            and gstate.phase.on_ground
            and truth.landed
        ):
            break

    end_time = truth.time
    summary = FlightSummary(
        was_airborne=was_airborne,
        touchdown_point=contact_point,
        touchdown_time=contact_time,
        armed_duration=armed_duration,
        end_time=end_time,
    )
    for v in finalize(summary, cfg.monitors):
        if v.constraint not in seen_constraints:
            seen_constraints.add(v.constraint)
            violations.append(v)
    counts = rollup(violations, graph)

    landing_error = None
    if contact_point is not None:
        landing_error = math.hypot(
            contact_point[0] - cfg.monitors.zone_center[0],
            contact_point[1] - cfg.monitors.zone_center[1],
        )

    hover_alt_error = None
    if hover_errs:
        t_end = hover_errs[-1][0]
        window = [e for t, e in hover_errs if t >= t_end - 2.0]
        hover_alt_error = sum(window) / len(window)

    uca_ids = scen.uca_ids if scen is not None else ()
    triggers = tuple(
        TriggerRecord(
            kind=f.kind.value,
            window=f.window,
            uca_ids=uca_ids if i < n_scen_faults else (),
            active_ticks=trig_ticks[i],
            first_active=trig_first[i],
            last_active=trig_last[i],
        )
        for i, f in enumerate(faults)
    )

    return RunReport(
        seed=cfg.seed,
        scenario=cfg.scenario,
        mitigations=cfg.mitigations,
        dt=cfg.dt,
        decimation=cfg.decimation,
        end_time=end_time,
        samples=tuple(samples),
        violations=tuple(violations),
        landing_error=landing_error,
        touchdown_time=touchdown_time,
        contact_time=contact_time,
        contact_point=contact_point,
        armed_duration=armed_duration,
        post_touchdown_thrust_ticks=(
            declared_thrust_ticks if touchdown_time is not None else grace_thrust_ticks
        ),
        spoof_fusions=spoof_fusions,
        fused_monotone=fused_monotone,
        mean_pad_error=(pad_err_sum / pad_err_count if pad_err_count else None),
        hover_alt_error=hover_alt_error,
        hazard_counts=counts.hazards,
        loss_counts=counts.losses,
        triggers=triggers,
        abort_reason=abort_reason,
        order_trace=tuple(trace),
    )


_CONSTRAINTS = tuple(f"SC-{i}" for i in range(1, 7))


@dataclass(frozen=True)
class MatrixRow:
    """Aggregate of one scenario x mitigation-set cell over all seeds."""

    scenario: str
    mitigations: str
    runs: int
    violation_rates: tuple
    mean_landing_error: Optional[float]
    mean_touchdown_time: Optional[float]


def _mit_label(flags: tuple) -> str:
    return "+".join(flags) if flags else "none"


def run_matrix(
    base: RunConfig,
    scenarios: Sequence[Optional[str]],
    mitigation_sets: Sequence[Sequence[str]],
    seeds: Sequence[int],
) -> tuple:
    """Scenario x mitigation-set grid, each cell aggregated over seeds.

    Rows come out in lexicographic (scenario, mitigations) order and
    seeds are sorted before running, so the result is invariant to the
    order the caller lists anything in.  Scenario entry None (or the
    string "none") is the fault-free baseline.
    """
    if not scenarios:
        raise HarnessError("matrix needs at least one scenario")
    if not mitigation_sets:
        raise HarnessError("matrix needs at least one mitigation set")
    if not seeds:
        raise HarnessError("matrix needs at least one seed")
    scen_labels = sorted({s if s not in (None, "none") else "none" for s in scenarios})
    mit_tuples = sorted({tuple(sorted(set(ms))) for ms in mitigation_sets})
    seed_list = sorted(set(seeds))

    rows = []
    for sl in scen_labels:
        for mt in mit_tuples:
            row_id = f"{sl}/{_mit_label(mt)}"
            reports = []
            for s in seed_list:
                try:
                    cfg = replace(
                        base,
                        scenario=None if sl == "none" else sl,
                        mitigations=mt,
                        seed=s,
                    )
                    reports.append(run(cfg))
                except Exception as exc:
                    raise HarnessError(f"row {row_id} seed {s}: {exc}") from exc
            rates = tuple(
                (sc, sum(1 for r in reports if r.violated(sc)) / len(reports))
                for sc in _CONSTRAINTS
            )
            les = [r.landing_error for r in reports if r.landing_error is not None]
            tds = [r.touchdown_time for r in reports if r.touchdown_time is not None]
            rows.append(
                MatrixRow(
                    scenario=sl,
                    mitigations=_mit_label(mt),
                    runs=len(reports),
                    violation_rates=rates,
                    mean_landing_error=sum(les) / len(les) if les else None,
                    mean_touchdown_time=sum(tds) / len(tds) if tds else None,
                )
            )
    return tuple(rows)


def _g(x: float) -> str:
    return "%.17g" % x


def report_to_dict(report: RunReport) -> dict:
    return {
        "seed": report.seed,
        "scenario": report.scenario,
        "mitigations": list(report.mitigations),
        "dt": report.dt,
        "decimation": report.decimation,
        "end_time": report.end_time,
        "landing_error": report.landing_error,
        "touchdown_time": report.touchdown_time,
        "contact_time": report.contact_time,
        "contact_point": list(report.contact_point) if report.contact_point else None,
        "armed_duration": report.armed_duration,
        "post_touchdown_thrust_ticks": report.post_touchdown_thrust_ticks,
        "spoof_fusions": report.spoof_fusions,
        "fused_monotone": report.fused_monotone,
        "mean_pad_error": report.mean_pad_error,
        "hover_alt_error": report.hover_alt_error,
        "abort_reason": report.abort_reason,
        "hazard_counts": dict(sorted(report.hazard_counts.items())),
        "loss_counts": dict(sorted(report.loss_counts.items())),
        "violations": [
            {
                "time": v.time,
                "constraint": v.constraint,
                "hazard": v.hazard,
                "measured": v.measured,
                "limit": v.limit,
                "detail": v.detail,
            }
            for v in report.violations
        ],
        "triggers": [
            {
                "kind": tr.kind,
                "window": list(tr.window),
                "uca_ids": list(tr.uca_ids),
                "active_ticks": tr.active_ticks,
                "first_active": tr.first_active,
                "last_active": tr.last_active,
            }
            for tr in report.triggers
        ],
        "samples": [
            {
                "t": s.t,
                "position": list(s.position),
                "velocity": list(s.velocity),
                "tilt": s.tilt,
                "eus_position": list(s.eus_position),
                "altitude": s.altitude,
                "source": s.source,
                "phase": s.phase,
                "collective": s.collective,
            }
            for s in report.samples
        ],
    }


def report_to_json(report: RunReport) -> str:
    return json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n"


_CSV_HEADER = "t,px,py,pz,vx,vy,vz,tilt,ex,ey,ez,alt,source,phase,collective"


def report_to_csv(report: RunReport) -> str:
    """Time-series table: one row per decimated tick plus the header."""
    lines = [_CSV_HEADER]
    for s in report.samples:
        lines.append(
            ",".join(
                [
                    _g(s.t),
                    _g(s.position[0]),
                    _g(s.position[1]),
                    _g(s.position[2]),
                    _g(s.velocity[0]),
                    _g(s.velocity[1]),
                    _g(s.velocity[2]),
                    _g(s.tilt),
                    _g(s.eus_position[0]),
                    _g(s.eus_position[1]),
                    _g(s.eus_position[2]),
                    _g(s.altitude),
                    s.source,
                    s.phase,
                    _g(s.collective),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def matrix_to_dicts(rows: Sequence[MatrixRow]) -> list:
    return [
        {
            "scenario": r.scenario,
            "mitigations": r.mitigations,
            "runs": r.runs,
            "violation_rates": {sc: rate for sc, rate in r.violation_rates},
            "mean_landing_error": r.mean_landing_error,
            "mean_touchdown_time": r.mean_touchdown_time,
        }
        for r in rows
    ]


def matrix_to_json(rows: Sequence[MatrixRow]) -> str:
    return json.dumps(matrix_to_dicts(rows), sort_keys=True, indent=2) + "\n"


def matrix_to_csv(rows: Sequence[MatrixRow]) -> str:
    header = "scenario,mitigations,runs," + ",".join(
        "rate_" + sc.lower().replace("-", "") for sc in _CONSTRAINTS
    ) + ",mean_landing_error,mean_touchdown_time"
    lines = [header]
    for r in rows:
        cells = [r.scenario, r.mitigations, str(r.runs)]
        cells += [_g(rate) for _, rate in r.violation_rates]
        cells.append(_g(r.mean_landing_error) if r.mean_landing_error is not None else "")
        cells.append(_g(r.mean_touchdown_time) if r.mean_touchdown_time is not None else "")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_report(report: RunReport, out_dir, fmt: str = "json") -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path = out / "report.json"
        path.write_text(report_to_json(report), encoding="utf-8")
    elif fmt == "csv":
        path = out / "samples.csv"
        path.write_text(report_to_csv(report), encoding="utf-8")
    else:
        raise HarnessError(f"unknown output format {fmt!r}")
    return path


def write_matrix(rows: Sequence[MatrixRow], out_dir, fmt: str = "json") -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path = out / "matrix.json"
        path.write_text(matrix_to_json(rows), encoding="utf-8")
    elif fmt == "csv":
        path = out / "matrix.csv"
        path.write_text(matrix_to_csv(rows), encoding="utf-8")
    else:
        raise HarnessError(f"unknown output format {fmt!r}")
    return path
