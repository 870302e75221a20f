"""Small vector and quaternion helpers used by the 500 Hz loop.

Vectors are plain float 3-tuples and quaternions are (w, x, y, z) float
4-tuples: the simulation advances hundreds of thousands of ticks per batch
run and tuple arithmetic keeps the per-tick cost in the microseconds, where
small numpy arrays would not.  numpy enters at the analysis boundaries
(tests, aggregation, noise generation), not here.

Quaternions rotate body frame into world frame (z-up).
"""

from __future__ import annotations

import math

Vec3 = tuple[float, float, float]
Quat = tuple[float, float, float, float]

ZERO3: Vec3 = (0.0, 0.0, 0.0)
QUAT_IDENTITY: Quat = (1.0, 0.0, 0.0, 0.0)


def vadd(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def vsub(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def vscale(a: Vec3, s: float) -> Vec3:
    return (a[0] * s, a[1] * s, a[2] * s)


def vmul(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] * b[0], a[1] * b[1], a[2] * b[2])


def vdot(a: Vec3, b: Vec3) -> float:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def vcross(a: Vec3, b: Vec3) -> Vec3:
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def vnorm(a: Vec3) -> float:
    return math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])


def vclamp_each(a: Vec3, limit: float) -> Vec3:
    """Clamp each component to [-limit, limit]."""
    return (
        min(max(a[0], -limit), limit),
        min(max(a[1], -limit), limit),
        min(max(a[2], -limit), limit),
    )


def vfinite(a: Vec3) -> bool:
    return math.isfinite(a[0]) and math.isfinite(a[1]) and math.isfinite(a[2])


def clamp(x: float, lo: float, hi: float) -> float:
    return min(max(x, lo), hi)


def quat_mul(q: Quat, r: Quat) -> Quat:
    qw, qx, qy, qz = q
    rw, rx, ry, rz = r
    return (
        qw * rw - qx * rx - qy * ry - qz * rz,
        qw * rx + qx * rw + qy * rz - qz * ry,
        qw * ry - qx * rz + qy * rw + qz * rx,
        qw * rz + qx * ry - qy * rx + qz * rw,
    )


def quat_conj(q: Quat) -> Quat:
    return (q[0], -q[1], -q[2], -q[3])


def quat_normalize(q: Quat) -> Quat:
    n = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    if n == 0.0:
        return QUAT_IDENTITY
    inv = 1.0 / n
    return (q[0] * inv, q[1] * inv, q[2] * inv, q[3] * inv)


def quat_norm(q: Quat) -> float:
    return math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])


def quat_rotate(q: Quat, v: Vec3) -> Vec3:
    """Rotate a body-frame vector into the world frame."""
    w, x, y, z = q
    vx, vy, vz = v
    # 2 * (q_vec x v), then v + w*t + q_vec x t
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    return (
        vx + w * tx + (y * tz - z * ty),
        vy + w * ty + (z * tx - x * tz),
        vz + w * tz + (x * ty - y * tx),
    )


def quat_rotate_inv(q: Quat, v: Vec3) -> Vec3:
    """Rotate a world-frame vector into the body frame."""
    return quat_rotate(quat_conj(q), v)


def quat_from_axis_angle(axis: Vec3, angle: float) -> Quat:
    n = vnorm(axis)
    if n == 0.0 or angle == 0.0:
        return QUAT_IDENTITY
    half = 0.5 * angle
    s = math.sin(half) / n
    return (math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s)


def quat_integrate(q: Quat, omega_body: Vec3, dt: float) -> Quat:
    """Advance attitude by a body-frame angular rate over dt (exact exp map)."""
    wx, wy, wz = omega_body
    angle = math.sqrt(wx * wx + wy * wy + wz * wz) * dt
    if angle == 0.0:
        return q
    half = 0.5 * angle
    s = math.sin(half) / (angle / dt)  # sin(half)/|omega|
    dq = (math.cos(half), wx * s, wy * s, wz * s)
    return quat_normalize(quat_mul(q, dq))


def quat_body_z(q: Quat) -> Vec3:
    """World-frame direction of the body z axis (thrust axis)."""
    w, x, y, z = q
    return (
        2.0 * (x * z + w * y),
        2.0 * (y * z - w * x),
        1.0 - 2.0 * (x * x + y * y),
    )


def tilt_angle(q: Quat) -> float:
    """Angle between body z and world z, in [0, pi]."""
    cz = 1.0 - 2.0 * (q[1] * q[1] + q[2] * q[2])
    return math.acos(clamp(cz, -1.0, 1.0))


def yaw_angle(q: Quat) -> float:
    w, x, y, z = q
    return math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))


def wrap_angle(a: float) -> float:
    """Wrap into (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi
