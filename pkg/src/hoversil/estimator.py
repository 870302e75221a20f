"""State estimation for the hover stack.

Simulated inertial/GPS/baro/IR sensors, a parametric fiducial-marker
detection model, weighted multi-marker fusion of the landing pad
position, the altitude-source switching logic, and the complementary
filter that produces the estimated UAV state (EUS) consumed by
guidance and control.

The marker model is parametric rather than image-based: detection
probability and measurement noise are driven by apparent size,
lighting, and occlusion, which is exactly the level the fault
scenarios operate at.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Optional

import numpy as np

from .mathutil import (
    Quat,
    Vec3,
    ZERO3,
    clamp,
    quat_integrate,
    quat_rotate,
    quat_rotate_inv,
    vadd,
    vcross,
    vfinite,
    vnorm,
    vscale,
    vsub,
    wrap_angle,
    yaw_angle,
)

GRAVITY = 9.81


class AltitudeSource(Enum):
    """Which reference the altitude/position channel is slaved to."""

    BARO = "Baro"
    VISION = "Vision"
    IR = "IR"


@dataclass(frozen=True)
class SensorReadings:
    """One tick of simulated sensor output (body-frame accel/gyro)."""

    gps: Vec3
    gps_valid: bool
    baro: float
    accel: Vec3
    gyro: Vec3
    heading: float
    ir: Optional[float]
    timestamp: float


@dataclass(frozen=True)
class Marker:
    """A single fiducial marker on the pad, offset from pad center."""

    id: str
    side: float
    offset: tuple[float, float]


@dataclass(frozen=True)
class PadLayout:
    markers: tuple[Marker, ...]
    center: Vec3 = ZERO3

    def __post_init__(self) -> None:
        if not self.markers:
            raise ValueError("pad layout needs at least one marker")
        ids = [m.id for m in self.markers]
        if len(set(ids)) != len(ids):
            raise ValueError("marker ids must be unique")
        if any(m.side <= 0.0 for m in self.markers):
            raise ValueError("marker side lengths must be positive")

    def primary_only(self) -> "PadLayout":
        """Reduce to the single main marker (largest; ties broken by centrality)."""
        best = max(self.markers, key=lambda m: (m.side, -math.hypot(*m.offset)))
        return PadLayout(markers=(best,), center=self.center)

    def marker_world(self, m: Marker) -> Vec3:
        return (self.center[0] + m.offset[0], self.center[1] + m.offset[1], self.center[2])


def default_pad_layout(center: Vec3 = ZERO3) -> PadLayout:
    """One large central marker, four ring markers, one small inner marker.

    Sizes vary on purpose: the big one carries the long-range fix, the ring
    adds redundancy against a covered center, and the small inner marker is
    the only one still inside the camera cone in the last half meter.
    """
    small = 0.4
    return PadLayout(
        markers=(
            Marker("M0", 0.80, (0.0, 0.0)),
            Marker("M1", small, (0.6, 0.0)),
            Marker("M2", small, (-0.6, 0.0)),
            Marker("M3", small, (0.0, 0.6)),
            Marker("M4", small, (0.0, -0.6)),
            Marker("M5", 0.2, (0.15, 0.15)),
        ),
        center=center,
    )


@dataclass(frozen=True)
class MarkerDetection:
    """One detected marker: body-frame relative position plus quality proxies."""

    marker_id: str
    relative: Vec3
    apparent_size: float
    confidence: float


@dataclass(frozen=True)
class CameraFrame:
    timestamp: float
    seq: int
    detections: tuple[MarkerDetection, ...] = ()


@dataclass(frozen=True)
class LandingPadEstimate:
    position: Vec3
    weight_sum: float
    timestamp: float
    marker_ids: tuple[str, ...]


@dataclass(frozen=True)
class EstimatedUavState:
    """EUS: the filtered state fed back to guidance and control."""

    position: Vec3
    velocity: Vec3
    attitude: Quat
    body_rates: Vec3
    altitude: float
    source: AltitudeSource
    timestamp: float


@dataclass(frozen=True)
class NoiseConfig:
    """Per-channel sensor noise plus IR beacon availability.

    gps_bias models a slowly varying receiver offset; the harness owns
    the bias walk and writes the current value here each tick.  The IR
    altimeter only reports when the beacon mitigation is fitted and the
    vehicle is within range of the beacon.
    """

    sigma_gps: float = 0.25
    sigma_baro: float = 0.05
    sigma_accel: float = 0.05
    sigma_gyro: float = 0.002
    sigma_heading: float = 0.01
    sigma_ir: float = 0.02
    gps_bias: Vec3 = ZERO3
    gps_valid: bool = True
    ir_enabled: bool = False
    ir_beacon: Vec3 = ZERO3
    ir_range: float = 20.0


@dataclass(frozen=True)
class CameraConfig:
    fov_half_angle: float = math.radians(60.0)
    resolvability: float = 0.015
    p_base: float = 0.95
    noise_base: float = 0.02
    capture_rate: float = 20.0
    latency: float = 0.05
    queue_depth: int = 3


@dataclass(frozen=True)
class EstimatorConfig:
    """Complementary-filter gains and switching parameters."""

    k_accel: float = 0.4
    k_heading: float = 2.0
    # position observers: kp/kv chosen for a critically damped double
    # pole at 8 rad/s, fast enough to pin the estimate within ~1 s
    pos_kp: float = 16.0
    pos_kv: float = 64.0
    baro_kp: float = 16.0
    baro_kv: float = 64.0
    ir_kp: float = 16.0
    ir_kv: float = 64.0
    vision_gain: float = 0.25
    vision_vel_gain: float = 0.15
    switch_threshold: float = 10.0
    switch_band: float = 0.5
    vision_stale_after: float = 0.3
    pad_surveyed: Vec3 = ZERO3


def simulate_sensors(
    truth,
    noise: NoiseConfig,
    rng: np.random.Generator,
    accel_world: Vec3 = ZERO3,
) -> SensorReadings:
    """Sample one tick of sensors from ground truth.

    Exactly 12 normal draws are consumed per call in a fixed order
    (gps 3, baro 1, accel 3, gyro 3, heading 1, ir 1), independent of
    which channels are present, so enabling the IR beacon does not
    shift any other subsystem's stream.
    """
    n = rng.standard_normal(12)
    q = truth.attitude
    # Accelerometer reads specific force in the body frame.
    f_body = quat_rotate_inv(q, vadd(accel_world, (0.0, 0.0, GRAVITY)))
    gps = (
        truth.position[0] + noise.gps_bias[0] + noise.sigma_gps * n[0],
        truth.position[1] + noise.gps_bias[1] + noise.sigma_gps * n[1],
        truth.position[2] + noise.gps_bias[2] + noise.sigma_gps * n[2],
    )
    baro = truth.position[2] + noise.sigma_baro * n[3]
    accel = (
        f_body[0] + noise.sigma_accel * n[4],
        f_body[1] + noise.sigma_accel * n[5],
        f_body[2] + noise.sigma_accel * n[6],
    )
    gyro = (
        truth.body_rates[0] + noise.sigma_gyro * n[7],
        truth.body_rates[1] + noise.sigma_gyro * n[8],
        truth.body_rates[2] + noise.sigma_gyro * n[9],
    )
    heading = wrap_angle(yaw_angle(q) + noise.sigma_heading * n[10])
    ir: Optional[float] = None
    if noise.ir_enabled:
        slant = vnorm(vsub(truth.position, noise.ir_beacon))
        if slant < noise.ir_range:
            ir = truth.position[2] + noise.sigma_ir * n[11]
    return SensorReadings(
        gps=gps,
        gps_valid=noise.gps_valid,
        baro=baro,
        accel=accel,
        gyro=gyro,
        heading=heading,
        ir=ir,
        timestamp=truth.time,
    )


def render_detections(
    truth,
    layout: PadLayout,
    cam: CameraConfig,
    lighting: float,
    occluded: Mapping[str, float],
    rng: np.random.Generator,
    t: float,
    seq: int,
) -> CameraFrame:
    """Produce one camera frame from the downward-looking detector model.

    A marker is detected iff it lies inside the field-of-view cone, its
    apparent size (side length / range) clears the resolvability
    threshold, and a Bernoulli draw with
    p = p_base * lighting * (1 - occluded fraction) succeeds.
    Measurement noise scales with 1 / apparent size.  Four draws are
    consumed per layout marker whether or not it is detected.
    """
    cos_fov = math.cos(cam.fov_half_angle)
    dets: list[MarkerDetection] = []
    for m in layout.markers:
        n = rng.standard_normal(3)
        u = rng.random()
        rel_world = vsub(layout.marker_world(m), truth.position)
        rng_to = vnorm(rel_world)
        if rng_to <= 1e-9:
            continue
        rel_body = quat_rotate_inv(truth.attitude, rel_world)
        # Camera bore axis is body -z.
        if -rel_body[2] / rng_to < cos_fov:
            continue
        apparent = m.side / rng_to
        if apparent < cam.resolvability:
            continue
        p = cam.p_base * clamp(lighting, 0.0, 1.0) * (1.0 - clamp(occluded.get(m.id, 0.0), 0.0, 1.0))
        if u >= p:
            continue
        sigma = cam.noise_base / apparent
        meas = (
            rel_body[0] + sigma * n[0],
            rel_body[1] + sigma * n[1],
            rel_body[2] + sigma * n[2],
        )
        dets.append(MarkerDetection(marker_id=m.id, relative=meas, apparent_size=apparent, confidence=p))
    return CameraFrame(timestamp=t, seq=seq, detections=tuple(dets))


@dataclass(frozen=True)
class GuardDecision:
    accepted: bool
    reason: str = ""


def guard_sequence(frame: CameraFrame, last: tuple[float, int]) -> GuardDecision:
    """Accept a frame only if both timestamp and sequence strictly advance."""
    last_ts, last_seq = last
    if frame.timestamp <= last_ts:
        return GuardDecision(False, "stale timestamp %.6f <= %.6f" % (frame.timestamp, last_ts))
    if frame.seq <= last_seq:
        return GuardDecision(False, "stale sequence %d <= %d" % (frame.seq, last_seq))
    return GuardDecision(True)


def fuse_pad_position(
    frame: CameraFrame,
    layout: PadLayout,
    eus: EstimatedUavState,
    tagging: bool,
) -> Optional[LandingPadEstimate]:
    """Weighted fusion of per-marker pad-center candidates.

    Each detection votes own position + rotated measurement - stored
    marker offset, weighted by apparent size x confidence.  With
    tagging enabled, ids absent from the layout are discarded before
    fusion; without it an unknown tag is taken at face value as a
    pad-center marker (offset zero), which is what makes spoofing bite.
    """
    known = {m.id: m for m in layout.markers}
    wsum = 0.0
    acc = [0.0, 0.0, 0.0]
    ids: list[str] = []
    for det in frame.detections:
        m = known.get(det.marker_id)
        if m is None:
            if tagging:
                continue
            off = (0.0, 0.0)
        else:
            off = m.offset
        world_rel = quat_rotate(eus.attitude, det.relative)
        cand = (
            eus.position[0] + world_rel[0] - off[0],
            eus.position[1] + world_rel[1] - off[1],
            eus.position[2] + world_rel[2],
        )
        w = det.apparent_size * det.confidence
        acc[0] += w * cand[0]
        acc[1] += w * cand[1]
        acc[2] += w * cand[2]
        wsum += w
        ids.append(det.marker_id)
    if wsum <= 0.0:
        return None
    return LandingPadEstimate(
        position=(acc[0] / wsum, acc[1] / wsum, acc[2] / wsum),
        weight_sum=wsum,
        timestamp=frame.timestamp,
        marker_ids=tuple(ids),
    )


def switch_source(
    eus_altitude: float,
    threshold: float,
    vision: Optional[LandingPadEstimate],
    ir: Optional[float],
    prev: AltitudeSource = AltitudeSource.BARO,
    band: float = 0.5,
) -> AltitudeSource:
    """Pick the altitude/position source around the threshold altitude.

    The decision altitude prefers the IR reading when present, so a
    biased belief altitude cannot force a premature switch.  Hysteresis:
    once below threshold, the switch only reverts above threshold+band.
    """
    if threshold <= 0.0:
        raise ValueError("threshold must be positive")
    alt = ir if ir is not None else eus_altitude
    limit = threshold + band if prev is not AltitudeSource.BARO else threshold
    if alt < limit:
        if vision is not None:
            return AltitudeSource.VISION
        if ir is not None:
            return AltitudeSource.IR
    return AltitudeSource.BARO


def initial_eus(readings: SensorReadings, cfg: EstimatorConfig) -> EstimatedUavState:
    """Boot the filter from the first sensor sample, level attitude."""
    half = 0.5 * readings.heading
    q0 = (math.cos(half), 0.0, 0.0, math.sin(half))
    pos = (readings.gps[0], readings.gps[1], readings.baro)
    return EstimatedUavState(
        position=pos,
        velocity=ZERO3,
        attitude=q0,
        body_rates=readings.gyro,
        altitude=pos[2],
        source=AltitudeSource.BARO,
        timestamp=readings.timestamp,
    )


def update_eus(
    readings: SensorReadings,
    pad: Optional[LandingPadEstimate],
    source: AltitudeSource,
    prev: EstimatedUavState,
    dt: float,
    cfg: EstimatorConfig,
) -> EstimatedUavState:
    """One complementary-filter step.

    Attitude: gyro integration corrected toward the accelerometer
    gravity direction and the heading reference.  Translation: inertial
    prediction corrected by GPS (xy) and the source-selected altitude
    reference, or by the fused pad innovation when the source is
    Vision.  `pad` must be the estimate fused this tick, or None.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    q = prev.attitude
    corr = [0.0, 0.0, 0.0]
    a_norm = vnorm(readings.accel)
    # The accelerometer is a gravity reference only near 1 g; under
    # maneuvering thrust the specific force points away from up and
    # would drag the attitude with it, so trust fades with |f| - g.
    trust = 1.0 - abs(a_norm - GRAVITY) / (0.3 * GRAVITY)
    if a_norm > 1e-9 and trust > 0.0:
        a_hat = vscale(readings.accel, 1.0 / a_norm)
        up_body = quat_rotate_inv(q, (0.0, 0.0, 1.0))
        e = vcross(a_hat, up_body)
        corr[0] += cfg.k_accel * trust * e[0]
        corr[1] += cfg.k_accel * trust * e[1]
        corr[2] += cfg.k_accel * trust * e[2]
    yaw_err = wrap_angle(readings.heading - yaw_angle(q))
    up_b = quat_rotate_inv(q, (0.0, 0.0, 1.0))
    corr[0] += cfg.k_heading * yaw_err * up_b[0]
    corr[1] += cfg.k_heading * yaw_err * up_b[1]
    corr[2] += cfg.k_heading * yaw_err * up_b[2]
    q_new = quat_integrate(
        q,
        (
            readings.gyro[0] + corr[0],
            readings.gyro[1] + corr[1],
            readings.gyro[2] + corr[2],
        ),
        dt,
    )

    a_world = vsub(quat_rotate(q_new, readings.accel), (0.0, 0.0, GRAVITY))
    vx = prev.velocity[0] + a_world[0] * dt
    vy = prev.velocity[1] + a_world[1] * dt
    vz = prev.velocity[2] + a_world[2] * dt
    px = prev.position[0] + vx * dt
    py = prev.position[1] + vy * dt
    pz = prev.position[2] + vz * dt

    if source is AltitudeSource.VISION:
        if pad is not None:
            ix = cfg.pad_surveyed[0] - pad.position[0]
            iy = cfg.pad_surveyed[1] - pad.position[1]
            iz = cfg.pad_surveyed[2] - pad.position[2]
            px += cfg.vision_gain * ix
            py += cfg.vision_gain * iy
            pz += cfg.vision_gain * iz
            vx += cfg.vision_vel_gain * ix
            vy += cfg.vision_vel_gain * iy
            vz += cfg.vision_vel_gain * iz
    else:
        if readings.gps_valid:
            ix = readings.gps[0] - px
            iy = readings.gps[1] - py
            px += cfg.pos_kp * ix * dt
            py += cfg.pos_kp * iy * dt
            vx += cfg.pos_kv * ix * dt
            vy += cfg.pos_kv * iy * dt
        if source is AltitudeSource.IR and readings.ir is not None:
            iz = readings.ir - pz
            pz += cfg.ir_kp * iz * dt
            vz += cfg.ir_kv * iz * dt
        else:
            iz = readings.baro - pz
            pz += cfg.baro_kp * iz * dt
            vz += cfg.baro_kv * iz * dt

    pos = (px, py, pz)
    vel = (vx, vy, vz)
    if not (vfinite(pos) and vfinite(vel)):
        raise ValueError("estimator state became non-finite")
    return EstimatedUavState(
        position=pos,
        velocity=vel,
        attitude=q_new,
        body_rates=readings.gyro,
        altitude=pz,
        source=source,
        timestamp=readings.timestamp,
    )
