"""Cascaded hover controller, motor allocation, and adaptive augmentation.

Outer loops (position P, velocity PID) run every `outer_every` ticks and
produce a held collective/attitude setpoint; inner loops (attitude P
with a tilt/yaw split, rate PID) run every tick.  Each loop saturates
its output before feeding the next, so inner-loop inputs always respect
the declared envelopes.  Allocation inverts the X-configuration mixer
with collective-priority clamping.  The adaptive augmentation is a
first-order disturbance observer on the acceleration and angular
acceleration residuals, compensating collective and torques.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

from .dynamics import MotorThrusts, VehicleParams
from .estimator import EstimatedUavState
from .mathutil import (
    Quat,
    QUAT_IDENTITY,
    Vec3,
    ZERO3,
    clamp,
    quat_body_z,
    quat_conj,
    quat_from_axis_angle,
    quat_mul,
    quat_normalize,
    tilt_angle,
    vadd,
    vclamp_each,
    vcross,
    vdot,
    vfinite,
    vmul,
    vscale,
    vsub,
)


class ControlError(RuntimeError):
    """Raised when a control loop produces a non-finite or out-of-scope result."""


class FlightMode(Enum):
    HOVER = "Hover"
    TRANSITION = "Transition"
    FIXED_WING = "FixedWing"
    BACK_TRANSITION = "BackTransition"


@dataclass(frozen=True)
class GainSet:
    """Loop gains, saturations, and adaptive-observer parameters.

    Saturations are the hand-off contracts between loops: velocity
    setpoints within max_velocity, commanded tilt within max_tilt, rate
    setpoints within max_rate, torques within max_torque.
    """

    pos_p: Vec3 = (1.2, 1.2, 1.5)
    vel_p: Vec3 = (3.0, 3.0, 4.0)
    vel_i: Vec3 = (0.4, 0.4, 0.0)
    vel_d: Vec3 = ZERO3
    att_p_tilt: float = 8.0
    att_p_yaw: float = 3.0
    rate_p: Vec3 = (30.0, 30.0, 12.0)
    rate_i: Vec3 = (8.0, 8.0, 4.0)
    rate_d: Vec3 = ZERO3
    max_velocity: float = 4.0
    max_tilt: float = 0.6
    max_rate: float = 3.0
    max_torque: Vec3 = (1.2, 1.2, 0.4)
    vel_integral_clamp: float = 2.0
    rate_integral_clamp: float = 0.5
    outer_every: int = 10
    adapt_tau: float = 1.0
    adapt_accel_bound: float = 4.0
    adapt_torque_bound: float = 0.5

    def __post_init__(self) -> None:
        for name in ("pos_p", "vel_p", "vel_i", "vel_d", "rate_p", "rate_i", "rate_d"):
            if any(g < 0.0 for g in getattr(self, name)):
                raise ValueError("%s must be nonnegative" % name)
        if self.att_p_tilt < 0.0 or self.att_p_yaw < 0.0:
            raise ValueError("attitude gains must be nonnegative")
        if min(self.max_velocity, self.max_tilt, self.max_rate) <= 0.0:
            raise ValueError("saturations must be positive")
        if any(m <= 0.0 for m in self.max_torque):
            raise ValueError("max_torque must be positive")
        if self.outer_every < 1:
            raise ValueError("outer_every must be at least 1")
        if self.adapt_tau <= 0.0:
            raise ValueError("adapt_tau must be positive")

    def scaled(self, factor: float) -> "GainSet":
        """Scale the loop gains (not the envelopes); models a bad gain update."""
        if factor < 0.0:
            raise ValueError("gain scale must be nonnegative")
        return replace(
            self,
            pos_p=vscale(self.pos_p, factor),
            vel_p=vscale(self.vel_p, factor),
            vel_i=vscale(self.vel_i, factor),
            vel_d=vscale(self.vel_d, factor),
            att_p_tilt=self.att_p_tilt * factor,
            att_p_yaw=self.att_p_yaw * factor,
            rate_p=vscale(self.rate_p, factor),
            rate_i=vscale(self.rate_i, factor),
            rate_d=vscale(self.rate_d, factor),
        )


@dataclass(frozen=True)
class Reference:
    position: Vec3
    yaw: float = 0.0


@dataclass(frozen=True)
class ControllerState:
    """Value state threaded through cascade_step/adaptive_augment."""

    tick: int = 0
    vel_integral: Vec3 = ZERO3
    prev_vel_error: Optional[Vec3] = None
    rate_integral: Vec3 = ZERO3
    prev_rate_error: Optional[Vec3] = None
    att_sp: Quat = QUAT_IDENTITY
    collective_sp: float = 0.0
    dist_accel: Vec3 = ZERO3
    dist_torque: Vec3 = ZERO3
    prev_velocity: Optional[Vec3] = None
    prev_rates: Optional[Vec3] = None
    last_command: Optional[tuple[float, Vec3]] = None


@dataclass(frozen=True)
class ActuatorCommand:
    thrusts: MotorThrusts = MotorThrusts()
    surfaces: tuple[float, ...] = ()


def _clamp_vec(v: Vec3, limit: Vec3) -> Vec3:
    return (
        clamp(v[0], -limit[0], limit[0]),
        clamp(v[1], -limit[1], limit[1]),
        clamp(v[2], -limit[2], limit[2]),
    )


def _attitude_from_thrust(f: Vec3, yaw: float) -> Quat:
    """Desired attitude: minimal tilt taking body z to the thrust
    direction, composed after a yaw rotation about world z."""
    fn = math.sqrt(f[0] * f[0] + f[1] * f[1] + f[2] * f[2])
    zb = (f[0] / fn, f[1] / fn, f[2] / fn)
    axis = vcross((0.0, 0.0, 1.0), zb)
    an = math.sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2])
    if an < 1e-12:
        q_tilt = QUAT_IDENTITY
    else:
        angle = math.acos(clamp(zb[2], -1.0, 1.0))
        q_tilt = quat_from_axis_angle(vscale(axis, 1.0 / an), angle)
    q_yaw = quat_from_axis_angle((0.0, 0.0, 1.0), yaw)
    return quat_normalize(quat_mul(q_tilt, q_yaw))


def cascade_step(
    ref: Reference,
    eus: EstimatedUavState,
    gains: GainSet,
    params: VehicleParams,
    cstate: ControllerState,
    dt: float,
) -> tuple[float, Vec3, ControllerState]:
    """One controller tick: returns (collective N, body torques N·m, state).

    Position/velocity loops run on ticks divisible by outer_every and
    hold their output; attitude/rate loops run every tick.
    """
    if dt <= 0.0:
        raise ControlError("dt must be positive")
    if not (vfinite(ref.position) and math.isfinite(ref.yaw)):
        raise ControlError("position loop: non-finite reference")
    if not (vfinite(eus.position) and vfinite(eus.velocity) and vfinite(eus.body_rates)):
        raise ControlError("position loop: non-finite state estimate")

    st = cstate
    if st.tick % gains.outer_every == 0:
        dto = dt * gains.outer_every
        pos_err = vsub(ref.position, eus.position)
        vel_sp = vclamp_each(vmul(gains.pos_p, pos_err), gains.max_velocity)
        assert all(abs(v) <= gains.max_velocity for v in vel_sp)

        vel_err = vsub(vel_sp, eus.velocity)
        integ = vclamp_each(vadd(st.vel_integral, vscale(vel_err, dto)), gains.vel_integral_clamp)
        if st.prev_vel_error is None:
            dterm = ZERO3
        else:
            dterm = vscale(vsub(vel_err, st.prev_vel_error), 1.0 / dto)
        acc = vadd(vadd(vmul(gains.vel_p, vel_err), vmul(gains.vel_i, integ)), vmul(gains.vel_d, dterm))
        # lateral disturbance feedforward; the vertical channel is
        # compensated on the collective by adaptive_augment
        acc = (acc[0] - st.dist_accel[0], acc[1] - st.dist_accel[1], acc[2])
        if not vfinite(acc):
            raise ControlError("velocity loop: non-finite acceleration command")

        f = vscale(vadd(acc, (0.0, 0.0, params.gravity)), params.mass)
        fz = max(f[2], 0.15 * params.mass * params.gravity)
        fh = math.hypot(f[0], f[1])
        fh_max = fz * math.tan(gains.max_tilt)
        if fh > fh_max:
            s = fh_max / fh
            f = (f[0] * s, f[1] * s, fz)
        else:
            f = (f[0], f[1], fz)
        collective = clamp(vdot(f, quat_body_z(eus.attitude)), 0.0, 4.0 * params.max_thrust)
        att_sp = _attitude_from_thrust(f, ref.yaw)
        assert tilt_angle(att_sp) <= gains.max_tilt + 1e-9
        st = replace(
            st,
            vel_integral=integ,
            prev_vel_error=vel_err,
            att_sp=att_sp,
            collective_sp=collective,
        )

    q_err = quat_mul(quat_conj(eus.attitude), st.att_sp)
    if q_err[0] < 0.0:
        q_err = (-q_err[0], -q_err[1], -q_err[2], -q_err[3])
    q_err = quat_normalize(q_err)
    rate_sp = vclamp_each(
        (
            2.0 * gains.att_p_tilt * q_err[1],
            2.0 * gains.att_p_tilt * q_err[2],
            2.0 * gains.att_p_yaw * q_err[3],
        ),
        gains.max_rate,
    )
    assert all(abs(r) <= gains.max_rate for r in rate_sp)

    rate_err = vsub(rate_sp, eus.body_rates)
    rinteg = vclamp_each(vadd(st.rate_integral, vscale(rate_err, dt)), gains.rate_integral_clamp)
    if st.prev_rate_error is None:
        rdterm = ZERO3
    else:
        rdterm = vscale(vsub(rate_err, st.prev_rate_error), 1.0 / dt)
    ang_acc = vadd(vadd(vmul(gains.rate_p, rate_err), vmul(gains.rate_i, rinteg)), vmul(gains.rate_d, rdterm))
    torque = _clamp_vec(vmul(params.inertia, ang_acc), gains.max_torque)
    if not vfinite(torque):
        raise ControlError("rate loop: non-finite torque command")

    st = replace(st, tick=st.tick + 1, rate_integral=rinteg, prev_rate_error=rate_err)
    return st.collective_sp, torque, st


def allocate(collective: float, torques: Vec3, params: VehicleParams) -> tuple[MotorThrusts, bool]:
    """Invert the X mixer; collective-priority clamping to [0, max].

    The torque increments are scaled back uniformly (one factor alpha)
    just enough to keep every motor in range, so the commanded collective
    is preserved whenever it is feasible on its own.
    """
    assert math.isfinite(collective) and vfinite(torques)
    tmax = params.max_thrust
    total = clamp(collective, 0.0, 4.0 * tmax)
    saturated = total != collective
    a4 = 4.0 * params.lever
    k4 = 4.0 * params.kappa
    dx, dy, dz = torques[0] / a4, torques[1] / a4, torques[2] / k4
    deltas = (-dx - dy + dz, dx - dy - dz, dx + dy + dz, -dx + dy - dz)
    base = total / 4.0
    alpha = 1.0
    for d in deltas:
        if d > 1e-12:
            alpha = min(alpha, (tmax - base) / d)
        elif d < -1e-12:
            alpha = min(alpha, base / -d)
    alpha = max(alpha, 0.0)
    if alpha < 1.0:
        saturated = True
    thrusts = tuple(clamp(base + alpha * d, 0.0, tmax) for d in deltas)
    return MotorThrusts(thrusts), saturated


def schedule(cmd: ActuatorCommand, mode: FlightMode) -> ActuatorCommand:
    """Mode filter: hover passes motors, fixed-wing passes surfaces."""
    if mode is FlightMode.HOVER:
        return ActuatorCommand(thrusts=cmd.thrusts, surfaces=tuple(0.0 for _ in cmd.surfaces))
    if mode is FlightMode.FIXED_WING:
        return ActuatorCommand(thrusts=MotorThrusts(), surfaces=cmd.surfaces)
    raise ControlError("flight mode %s is out of scope" % mode.value)


def adaptive_augment(
    cstate: ControllerState,
    eus: EstimatedUavState,
    nominal: tuple[float, Vec3],
    gains: GainSet,
    params: VehicleParams,
    dt: float,
    enabled: bool,
) -> tuple[float, Vec3, ControllerState]:
    """Disturbance-observer augmentation of the nominal command.

    Residual = estimated acceleration (finite-differenced EUS velocity)
    minus the acceleration predicted from the previously issued command;
    low-pass filtered into a bounded disturbance estimate.  The vertical
    component corrects the collective here; the lateral components are
    consumed by the velocity loop next outer tick.  Disabled: identity.
    """
    collective, torques = nominal
    if dt <= 0.0:
        raise ControlError("dt must be positive")
    if not enabled:
        return collective, torques, cstate

    st = cstate
    d_acc = st.dist_accel
    d_tau = st.dist_torque
    if st.prev_velocity is not None and st.last_command is not None:
        last_f, last_tau = st.last_command
        a_est = vscale(vsub(eus.velocity, st.prev_velocity), 1.0 / dt)
        a_pred = vsub(
            vscale(quat_body_z(eus.attitude), last_f / params.mass),
            (0.0, 0.0, params.gravity),
        )
        resid = vsub(a_est, a_pred)
        g = dt / gains.adapt_tau
        d_acc = vclamp_each(
            vadd(d_acc, vscale(vsub(resid, d_acc), g)), gains.adapt_accel_bound
        )
        if st.prev_rates is not None:
            w_dot = vscale(vsub(eus.body_rates, st.prev_rates), 1.0 / dt)
            tau_resid = vsub(vmul(params.inertia, w_dot), last_tau)
            d_tau = vclamp_each(
                vadd(d_tau, vscale(vsub(tau_resid, d_tau), g)), gains.adapt_torque_bound
            )

    out_f = clamp(collective - params.mass * d_acc[2], 0.0, 4.0 * params.max_thrust)
    out_tau = _clamp_vec(vsub(torques, d_tau), gains.max_torque)
    st = replace(
        st,
        dist_accel=d_acc,
        dist_torque=d_tau,
        prev_velocity=eus.velocity,
        prev_rates=eus.body_rates,
        last_command=(out_f, out_tau),
    )
    return out_f, out_tau, st
