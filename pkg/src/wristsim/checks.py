"""Built-in invariant suite behind the command line ``--check`` flag.

Each check exercises one structural property of the package on freshly
sampled inputs and reports the worst deviation it saw.  The suite is meant
as a fast field diagnostic (a few seconds), not a replacement for the test
suite; the bounds are the ones the rest of the package relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import BodyModel, WristState, integrate_step
from .rotations import (
    GimbalLockError,
    X_AXIS,
    euler_xyz_from_quat,
    project_to_sphere,
    quat_angle_between,
    quat_from_euler_xyz,
    quat_mul,
    quat_norm,
    quat_normalize,
    rotate_vec,
)
from .experiments import pointer_intersection


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _sample_plane_points(rng, n, plane_x=0.3, radius=0.25):
    pts = np.empty((n, 3))
    pts[:, 0] = plane_x
    pts[:, 1:] = rng.uniform(-radius, radius, size=(n, 2))
    return pts


def check_torsion_equivariance(rng, n=2000, tol=1e-12) -> CheckResult:
    """Rolling the torsion argument equals post-multiplying the fixed twist."""
    worst = 0.0
    for point in _sample_plane_points(rng, n):
        phi = rng.uniform(-math.pi + 1e-3, math.pi - 1e-3)
        q_plain = project_to_sphere(point)
        q_rolled = project_to_sphere(point, torsion=phi)
        roll = np.array([math.cos(0.5 * phi), math.sin(0.5 * phi), 0.0, 0.0])
        worst = max(worst, quat_angle_between(q_rolled, quat_mul(q_plain, roll)))
        # the twist must not move the pointing ray
        ray_diff = rotate_vec(q_rolled, X_AXIS) - rotate_vec(q_plain, X_AXIS)
        worst = max(worst, float(np.linalg.norm(ray_diff)))
    return CheckResult(
        "torsion equivariance",
        worst <= tol,
        f"worst deviation {worst:.3e} (tol {tol:.0e}, {n} samples)",
    )


def check_pointing_consistency(rng, n=2000, tol=1e-10) -> CheckResult:
    """Projecting a plane point and re-intersecting recovers the point."""
    worst = 0.0
    for point in _sample_plane_points(rng, n):
        phi = rng.uniform(-math.pi + 1e-3, math.pi - 1e-3)
        q = project_to_sphere(point, torsion=phi)
        hit = pointer_intersection(q, point[0])
        worst = max(worst, float(np.linalg.norm(hit - point)))
    return CheckResult(
        "pointing consistency",
        worst <= tol,
        f"worst round trip {worst:.3e} m (tol {tol:.0e}, {n} samples)",
    )


def check_euler_round_trip(rng, n=100_000, tol=1e-9) -> CheckResult:
    """Euler decomposition followed by recomposition returns the rotation."""
    worst = 0.0
    kept = 0
    raw = rng.standard_normal((n, 4))
    for row in raw:
        q = quat_normalize(row)
        try:
            ax, ay, az = euler_xyz_from_quat(q)
        except GimbalLockError:
            continue
        kept += 1
        worst = max(worst, quat_angle_between(q, quat_from_euler_xyz(ax, ay, az)))
    return CheckResult(
        "euler round trip",
        worst <= tol and kept > 0,
        f"worst angle {worst:.3e} rad over {kept} of {n} samples (tol {tol:.0e})",
    )


def _smooth_torque(q, omega, t):
    return np.array(
        [0.2 * math.sin(3.0 * t), 0.15 * math.cos(5.0 * t), 0.1 * math.sin(2.0 * t + 1.0)]
    )


def check_integrator_order(ratio_lo=10.0, ratio_hi=24.0) -> CheckResult:
    """Halving the step shrinks the global error ~16x (4th order)."""
    body = BodyModel(gravity=(0.0, 0.0, 0.0))
    q0 = quat_normalize(np.array([0.9, 0.1, -0.2, 0.15]))
    start = WristState(q=q0, omega=np.array([0.4, -0.3, 0.2]), t=0.0)

    def endpoint(substeps):
        s = integrate_step(
            WristState(q=start.q.copy(), omega=start.omega.copy(), t=0.0),
            _smooth_torque,
            body,
            dt=0.2,
            substeps=substeps,
            renormalize=False,
        )
        return np.concatenate((s.q, s.omega))

    ref = endpoint(1600)
    err_h = float(np.linalg.norm(endpoint(50) - ref))
    err_h2 = float(np.linalg.norm(endpoint(100) - ref))
    ratio = err_h / err_h2 if err_h2 > 0.0 else math.inf
    return CheckResult(
        "integrator order",
        ratio_lo <= ratio <= ratio_hi,
        f"error ratio {ratio:.2f} for step halving (expect ~16)",
    )


def check_quat_norm_drift(tol=1e-9, steps=500) -> CheckResult:
    """Norm drift per 1 ms step, unnormalized, at clock-task torque levels."""
    body = BodyModel()
    q_des = project_to_sphere(np.array([0.3, 0.0, 0.1]))
    stiffness = 10000.0

    def controller(q, omega, t):
        err = quat_mul(q_des, np.array([q[0], -q[1], -q[2], -q[3]]))
        vec = err[1:]
        vn = float(np.linalg.norm(vec))
        if vn < 1e-15:
            return np.zeros(3)
        angle = 2.0 * math.atan2(vn, err[0])
        sign = 1.0 if err[0] >= 0.0 else -1.0
        return sign * stiffness * angle / vn * vec

    # start close enough that the spring torque stays at task scale
    state = WristState(
        q=project_to_sphere(np.array([0.3, 0.0005, 0.1002])),
        omega=np.array([0.05, -1.2, 0.8]),
        t=0.0,
    )
    worst = 0.0
    for _ in range(steps):
        state = integrate_step(
            state, controller, body, dt=1e-3, substeps=10, renormalize=False
        )
        worst = max(worst, abs(quat_norm(state.q) - 1.0))
        state.q = state.q / quat_norm(state.q)
    return CheckResult(
        "quat norm drift",
        worst <= tol,
        f"worst per-step drift {worst:.3e} (tol {tol:.0e}, {steps} steps)",
    )


def run_checks(seed: int = 0) -> list[CheckResult]:
    """Run the whole suite; deterministic for a fixed seed."""
    rng = np.random.default_rng(seed)
    return [
        check_torsion_equivariance(rng),
        check_pointing_consistency(rng),
        check_euler_round_trip(rng),
        check_integrator_order(),
        check_quat_norm_drift(),
    ]
