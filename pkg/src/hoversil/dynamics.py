"""Ground-truth quadrotor rigid-body simulation for the hover regime.

Newton-Euler dynamics with an X-configuration rotor layout, linear drag in
the relative air velocity, a piecewise-constant wind field, and an inelastic
ground clamp.  Integration is semi-implicit Euler: velocities advance first,
positions advance on the updated velocities.  Everything here is a pure
function over value types and is bit-deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .mathutil import (
    Quat,
    QUAT_IDENTITY,
    Vec3,
    ZERO3,
    quat_body_z,
    quat_integrate,
    vfinite,
)

SQRT2 = math.sqrt(2.0)


class DynamicsError(ValueError):
    """Invalid physical parameters or non-finite state/inputs."""


@dataclass(frozen=True)
class VehicleParams:
    """Physical constants of the airframe.

    The X layout places the four rotors at +-45 degrees from the body x axis
    at `arm_length` from the center; spin directions alternate so yaw torque
    is kappa * thrust per motor with alternating sign:

        m1 (front-left, CW)    m0 (front-right, CCW)
                    \\   x^   /
                     \\  |   /
                      center --> y
                     /       \\
        m2 (rear-left, CCW)   m3 (rear-right, CW)
    """

    mass: float = 1.5                      # kg
    inertia: Vec3 = (0.025, 0.025, 0.045)  # kg m^2, body-diagonal
    arm_length: float = 0.25               # m
    kappa: float = 0.016                   # yaw torque per unit thrust
    max_thrust: float = 8.0                # N per motor
    drag: Vec3 = (0.25, 0.25, 0.35)        # 1/s, linear in relative velocity
    gravity: float = 9.81                  # m/s^2

    def __post_init__(self) -> None:
        scalars = (self.mass, self.arm_length, self.kappa, self.max_thrust, self.gravity)
        if any(s <= 0.0 for s in scalars) or any(i <= 0.0 for i in self.inertia):
            raise DynamicsError("vehicle parameters must be strictly positive")
        if any(d < 0.0 for d in self.drag):
            raise DynamicsError("drag coefficients must be nonnegative")
        if 4.0 * self.max_thrust <= self.mass * self.gravity:
            raise DynamicsError("hover infeasible: 4 x max_thrust <= weight")

    @property
    def lever(self) -> float:
        """Moment arm of each rotor about the body x/y axes."""
        return self.arm_length / SQRT2


@dataclass(frozen=True)
class RigidBodyState:
    position: Vec3 = ZERO3          # m, world, z up
    velocity: Vec3 = ZERO3          # m/s, world
    attitude: Quat = QUAT_IDENTITY  # body -> world
    body_rates: Vec3 = ZERO3        # rad/s, body frame
    time: float = 0.0               # s

    @property
    def landed(self) -> bool:
        return self.position[2] <= 0.0 and self.velocity[2] <= 0.0


@dataclass(frozen=True)
class MotorThrusts:
    thrusts: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    @property
    def total(self) -> float:
        t = self.thrusts
        return t[0] + t[1] + t[2] + t[3]


@dataclass(frozen=True)
class WindField:
    """Constant ambient wind plus piecewise-constant gust steps.

    Each schedule entry is (t_on, t_off, velocity); active entries add to the
    constant component.  Sampling is exact and allocation free.
    """

    constant: Vec3 = ZERO3
    schedule: tuple[tuple[float, float, Vec3], ...] = ()

    def at(self, t: float) -> Vec3:
        wx, wy, wz = self.constant
        for t_on, t_off, vel in self.schedule:
            if t_on <= t < t_off:
                wx += vel[0]
                wy += vel[1]
                wz += vel[2]
        return (wx, wy, wz)

    def plus_step(self, t_on: float, t_off: float, vel: Vec3) -> "WindField":
        return replace(self, schedule=self.schedule + ((t_on, t_off, vel),))


def mix(thrusts: MotorThrusts, params: VehicleParams) -> tuple[float, Vec3]:
    """Forward mixing: motor thrusts -> (collective N, body torques N m).

    This is the single definition of the X-configuration geometry; control
    allocation inverts exactly this map.
    """
    t0, t1, t2, t3 = thrusts.thrusts
    a = params.lever
    k = params.kappa
    collective = t0 + t1 + t2 + t3
    # Motor positions (x fwd, y left): m0 (+a,-a)  m1 (+a,+a)  m2 (-a,+a)  m3 (-a,-a).
    # tau = r x (t z): roll = sum(y_i t_i), pitch = -sum(x_i t_i).
    tau_x = a * (-t0 + t1 + t2 - t3)
    tau_y = a * (-t0 - t1 + t2 + t3)
    tau_z = k * (t0 - t1 + t2 - t3)    # alternating spin; CCW pair reacts +z
    return collective, (tau_x, tau_y, tau_z)


def hover_trim(params: VehicleParams) -> MotorThrusts:
    """Four equal thrusts balancing weight: each = m g / 4."""
    per_motor = params.mass * params.gravity / 4.0
    if per_motor > params.max_thrust:
        raise DynamicsError("hover trim exceeds per-motor thrust limit")
    return MotorThrusts((per_motor, per_motor, per_motor, per_motor))


def step(
    state: RigidBodyState,
    thrusts: MotorThrusts,
    wind: WindField,
    params: VehicleParams,
    dt: float,
) -> RigidBodyState:
    """Advance the truth state one tick of dt seconds."""
    if not 0.0 < dt <= 0.02:
        raise DynamicsError(f"dt {dt} outside (0, 0.02]")
    if not (
        vfinite(state.position)
        and vfinite(state.velocity)
        and vfinite(state.body_rates)
        and all(math.isfinite(t) for t in thrusts.thrusts)
    ):
        raise DynamicsError("non-finite state or thrust input")

    m = params.mass
    g = params.gravity
    collective, (tau_x, tau_y, tau_z) = mix(thrusts, params)

    # Translational: thrust along body z, gravity, linear drag vs wind.
    bz = quat_body_z(state.attitude)
    w = wind.at(state.time)
    vx, vy, vz = state.velocity
    cx, cy, cz = params.drag
    acc = (
        bz[0] * collective / m - cx * (vx - w[0]),
        bz[1] * collective / m - cy * (vy - w[1]),
        bz[2] * collective / m - g - cz * (vz - w[2]),
    )
    nvx = vx + acc[0] * dt
    nvy = vy + acc[1] * dt
    nvz = vz + acc[2] * dt
    px, py, pz = state.position
    npos = (px + nvx * dt, py + nvy * dt, pz + nvz * dt)

    # Rotational: Euler's equations with diagonal inertia.
    ix, iy, iz = params.inertia
    wxr, wyr, wzr = state.body_rates
    dom = (
        (tau_x - (iz - iy) * wyr * wzr) / ix,
        (tau_y - (ix - iz) * wzr * wxr) / iy,
        (tau_z - (iy - ix) * wxr * wyr) / iz,
    )
    nrates = (wxr + dom[0] * dt, wyr + dom[1] * dt, wzr + dom[2] * dt)
    natt = quat_integrate(state.attitude, nrates, dt)

    nvel = (nvx, nvy, nvz)
    # Inelastic ground: at or below the surface and moving down -> parked.
    if npos[2] <= 0.0 and nvz <= 0.0:
        npos = (npos[0], npos[1], 0.0)
        nvel = ZERO3
        nrates = ZERO3

    return RigidBodyState(
        position=npos,
        velocity=nvel,
        attitude=natt,
        body_rates=nrates,
        time=state.time + dt,
    )
