"""Quaternion algebra and the spherical pointing projection.

Conventions used throughout the package:

* quaternions are numpy arrays ``[w, x, y, z]`` (scalar first),
* unit quaternions rotate body-frame vectors into the world frame,
* composition ``quat_mul(a, b)`` applies ``b`` first, then ``a``,
* canonical form has a non-negative scalar part.

The projection maps a point on a planar workspace to the orientation of a
pointer (the body x axis) whose ray pierces that point, with an optional
torsion angle about the pointer itself.
"""

from __future__ import annotations

import math

import numpy as np

X_AXIS = np.array([1.0, 0.0, 0.0])

# unit ray used to disambiguate the antipodal (pointer exactly reversed) case
ANTIPODAL_AXIS = np.array([0.0, 0.0, 1.0])


class DegeneratePointingError(ValueError):
    """Raised when a pointing target coincides with the projection center."""


class GimbalLockError(ValueError):
    """Raised when an Euler decomposition is evaluated too close to lock."""

    def __init__(self, quat):
        super().__init__(f"orientation within gimbal-lock guard band: {quat}")
        self.quat = np.asarray(quat, dtype=float)


def identity_quat() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a*b."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_norm(q: np.ndarray) -> float:
    # multiplication, not **2: libm pow can land one ulp off an exact square
    return math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    n = quat_norm(q)
    if n < 1e-12:
        raise ValueError("cannot normalize a near-zero quaternion")
    return np.asarray(q, dtype=float) / n


def quat_canonical(q: np.ndarray) -> np.ndarray:
    """Flip sign so the scalar part is non-negative (same rotation)."""
    return -np.asarray(q, dtype=float) if q[0] < 0.0 else np.asarray(q, dtype=float)


def quat_inverse(q: np.ndarray) -> np.ndarray:
    """Inverse of a unit quaternion (its conjugate)."""
    return quat_conj(q)


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        raise ValueError("rotation axis must be nonzero")
    half = 0.5 * angle
    return np.concatenate(([math.cos(half)], math.sin(half) / n * axis))


def rotate_vec(q: np.ndarray, v) -> np.ndarray:
    """Rotate a 3-vector by the unit quaternion q (body -> world)."""
    w, x, y, z = q
    vx, vy, vz = v
    # q * (0, v) * conj(q), expanded
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    return np.array(
        [
            vx + w * tx + y * tz - z * ty,
            vy + w * ty + z * tx - x * tz,
            vz + w * tz + x * ty - y * tx,
        ]
    )


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix whose columns are the body axes in world coordinates."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_angle(q: np.ndarray) -> float:
    """Rotation angle in [0, pi] represented by q (sign-insensitive)."""
    vn = math.sqrt(q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    return 2.0 * math.atan2(vn, abs(q[0]))


def quat_angle_between(a: np.ndarray, b: np.ndarray) -> float:
    """Relative rotation angle between two unit quaternions."""
    return quat_angle(quat_mul(a, quat_conj(b)))


# ---------------------------------------------------------------------------
# pointing projection
# ---------------------------------------------------------------------------


def project_to_sphere(
    point,
    center=(0.0, 0.0, 0.0),
    torsion: float = 0.0,
    twist_convention: str = "pointer",
) -> np.ndarray:
    """Orientation that points the body x axis at ``point``.

    The swing part is the shortest-arc rotation taking +x onto the unit ray
    from ``center`` to ``point``; ``torsion`` then rolls the body about the
    pointer.  With ``twist_convention="pointer"`` the roll is composed in the
    rotated frame, so the pointing direction is torsion-invariant and
    ``torsion_about_pointer`` recovers the angle exactly.  The alternative
    ``"global"`` convention pre-multiplies a roll about the world x axis,
    which tilts the pointer whenever torsion is nonzero; it is kept only for
    comparison.

    Returns the canonical (non-negative scalar) unit quaternion.
    """
    point = np.asarray(point, dtype=float)
    offset = point - np.asarray(center, dtype=float)
    dist = math.sqrt(offset[0] * offset[0] + offset[1] * offset[1]
                     + offset[2] * offset[2])
    if dist <= 1e-9:
        raise DegeneratePointingError(
            f"pointing target {point} coincides with projection center"
        )
    ray = offset / dist
    cos_swing = ray[0]
    if cos_swing <= -1.0 + 1e-15:
        # pointer exactly reversed: 180 degree swing about a fixed reference axis
        swing = np.concatenate(([0.0], ANTIPODAL_AXIS))
    else:
        swing = quat_normalize(
            np.concatenate(([1.0 + cos_swing], np.cross(X_AXIS, ray)))
        )
    if torsion == 0.0:
        return quat_canonical(swing)
    roll = np.array([math.cos(0.5 * torsion), math.sin(0.5 * torsion), 0.0, 0.0])
    if twist_convention == "pointer":
        q = quat_mul(swing, roll)
    elif twist_convention == "global":
        q = quat_mul(roll, swing)
    else:
        raise ValueError(f"unknown twist convention {twist_convention!r}")
    return quat_canonical(q)


def swing_twist(q: np.ndarray, axis) -> tuple[np.ndarray, np.ndarray]:
    """Split q into swing * twist, with twist a rotation about ``axis``.

    ``axis`` must be a unit 3-vector expressed in the body frame.
    """
    axis = np.asarray(axis, dtype=float)
    proj = q[1] * axis[0] + q[2] * axis[1] + q[3] * axis[2]
    twist = np.concatenate(([q[0]], proj * axis))
    n = quat_norm(twist)
    if n < 1e-12:
        # pure 180-degree swing orthogonal to the axis: twist is identity
        return np.asarray(q, dtype=float), identity_quat()
    twist /= n
    return quat_mul(q, quat_conj(twist)), twist


def torsion_about_pointer(q: np.ndarray) -> float:
    """Signed roll of the body about its own x axis, in (-pi, pi].

    This is the twist angle of the swing-twist split about +x, which the
    pointing projection composes last; pure swing rotations return 0.
    """
    q = quat_canonical(q)
    if abs(q[0]) < 1e-15 and abs(q[1]) < 1e-15:
        return 0.0
    return 2.0 * math.atan2(q[1], q[0])


# ---------------------------------------------------------------------------
# intrinsic x-y-z Euler decomposition
# ---------------------------------------------------------------------------

GIMBAL_GUARD = 1e-6


def euler_xyz_from_quat(q: np.ndarray) -> tuple[float, float, float]:
    """Intrinsic x-y-z Euler angles (rotate about x, then y', then z'').

    The middle angle lies in (-pi/2, pi/2); poses within ``GIMBAL_GUARD``
    radians of lock raise :class:`GimbalLockError`.
    """
    w, x, y, z = q
    r02 = 2.0 * (x * z + w * y)
    ang_y = math.asin(max(-1.0, min(1.0, r02)))
    if 0.5 * math.pi - abs(ang_y) < GIMBAL_GUARD:
        raise GimbalLockError(q)
    r12 = 2.0 * (y * z - w * x)
    r22 = 1.0 - 2.0 * (x * x + y * y)
    r01 = 2.0 * (x * y - w * z)
    r00 = 1.0 - 2.0 * (y * y + z * z)
    return math.atan2(-r12, r22), ang_y, math.atan2(-r01, r00)


def quat_from_euler_xyz(ang_x: float, ang_y: float, ang_z: float) -> np.ndarray:
    qx = np.array([math.cos(0.5 * ang_x), math.sin(0.5 * ang_x), 0.0, 0.0])
    qy = np.array([math.cos(0.5 * ang_y), 0.0, math.sin(0.5 * ang_y), 0.0])
    qz = np.array([math.cos(0.5 * ang_z), 0.0, 0.0, math.sin(0.5 * ang_z)])
    return quat_mul(qx, quat_mul(qy, qz))
