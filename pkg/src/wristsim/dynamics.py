"""Rigid-body wrist plant: a box on an ideal spherical joint at the origin.

State is the body orientation quaternion (body -> world) plus the body-frame
angular velocity.  The only torques are the commanded world-frame control
torque and gravity acting at the center of mass; there is no joint friction,
so any damping must come from the controller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .rotations import quat_mul, quat_norm, rotate_vec

GRAVITY_DEFAULT = (0.0, 0.0, -9.81)


class IntegrationError(RuntimeError):
    """Raised when the adaptive integrator cannot meet its tolerance."""


def inertia_box(
    mass: float, length: float, width: float, thickness: float, com_offset
) -> np.ndarray:
    """Inertia tensor about the joint for a uniform box.

    ``length`` runs along the body x (pointer) axis, ``width`` along y and
    ``thickness`` along z.  The center of mass sits at ``com_offset`` in the
    body frame and the joint at the body origin, so the central inertia is
    shifted by the parallel-axis term.
    """
    lx, ly, lz = length, width, thickness
    central = (
        mass
        / 12.0
        * np.diag([ly**2 + lz**2, lx**2 + lz**2, lx**2 + ly**2])
    )
    d = np.asarray(com_offset, dtype=float)
    return central + mass * (float(d @ d) * np.eye(3) - np.outer(d, d))


@dataclass(frozen=True)
class BodyModel:
    """Geometry, mass properties and the ambient gravity vector."""

    mass: float = 1.0
    length: float = 0.10
    width: float = 0.08
    thickness: float = 0.02
    com_offset: tuple = (0.05, 0.0, 0.0)
    gravity: tuple = GRAVITY_DEFAULT

    def __post_init__(self):
        for name in ("mass", "length", "width", "thickness"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        object.__setattr__(self, "com_offset", tuple(float(c) for c in self.com_offset))
        object.__setattr__(self, "gravity", tuple(float(g) for g in self.gravity))

    @property
    def inertia(self) -> np.ndarray:
        return inertia_box(
            self.mass, self.length, self.width, self.thickness, self.com_offset
        )


@dataclass
class WristState:
    q: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))
    t: float = 0.0


def gravity_torque(q: np.ndarray, body: BodyModel) -> np.ndarray:
    """Body-frame torque of gravity about the joint at orientation q."""
    g_body = rotate_vec(
        np.array([q[0], -q[1], -q[2], -q[3]]), np.asarray(body.gravity)
    )
    return np.cross(body.com_offset, body.mass * g_body)


def dynamics_rhs(
    q: np.ndarray, omega: np.ndarray, tau_body: np.ndarray, body: BodyModel
) -> tuple[np.ndarray, np.ndarray]:
    """Time derivatives (q_dot, omega_dot) for a body-frame applied torque.

    Gravity is added internally; ``tau_body`` is everything else, already
    expressed in the body frame.
    """
    inertia = body.inertia
    total = tau_body + gravity_torque(q, body) - np.cross(omega, inertia @ omega)
    omega_dot = np.linalg.solve(inertia, total)
    q_dot = 0.5 * quat_mul(q, np.concatenate(([0.0], omega)))
    return q_dot, omega_dot


# ---------------------------------------------------------------------------
# integration of the closed loop
# ---------------------------------------------------------------------------

# Dormand-Prince embedded 4(5) tableau
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_DP_B4 = (
    5179 / 57600,
    0.0,
    7571 / 16695,
    393 / 640,
    -92097 / 339200,
    187 / 2100,
    1 / 40,
)

MIN_ADAPTIVE_STEP = 1e-9


def _pack(q, omega):
    return np.concatenate((q, omega))


def _plant_rhs(y, t, controller, body, inertia, inertia_inv):
    q = y[:4]
    omega = y[4:]
    tau_world = controller(q, omega, t)
    tau_body = rotate_vec(np.array([q[0], -q[1], -q[2], -q[3]]), tau_world)
    total = tau_body + gravity_torque(q, body) - np.cross(omega, inertia @ omega)
    omega_dot = inertia_inv @ total
    q_dot = 0.5 * quat_mul(q, np.concatenate(([0.0], omega)))
    return np.concatenate((q_dot, omega_dot))


def _rk4(y, t, h, rhs):
    k1 = rhs(y, t)
    k2 = rhs(y + 0.5 * h * k1, t + 0.5 * h)
    k3 = rhs(y + 0.5 * h * k2, t + 0.5 * h)
    k4 = rhs(y + h * k3, t + h)
    return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_step(
    state: WristState,
    controller: Callable[[np.ndarray, np.ndarray, float], np.ndarray],
    body: BodyModel,
    dt: float = 1e-3,
    method: str = "rk4",
    substeps: int = 5,
    rtol: float = 1e-8,
    renormalize: bool = True,
) -> WristState:
    """Advance plant plus controller closure by one control interval.

    ``controller(q, omega, t)`` returns the commanded world-frame torque and
    is re-evaluated at every integrator stage, so the feedback is continuous
    within the step.  The fixed-step method takes ``substeps`` classical RK4
    substeps per call (the stiffest torsional mode at clock-task stiffness
    sits outside the RK4 stability region at the full control interval); the
    adaptive method is embedded Dormand-Prince 4(5) with error control.
    """
    inertia = body.inertia
    inertia_inv = np.linalg.inv(inertia)

    def rhs(y, t):
        return _plant_rhs(y, t, controller, body, inertia, inertia_inv)

    y = _pack(np.asarray(state.q, dtype=float), np.asarray(state.omega, dtype=float))
    t0 = state.t
    if method == "rk4":
        h = dt / substeps
        for i in range(substeps):
            y = _rk4(y, t0 + i * h, h, rhs)
            if renormalize:
                y[:4] /= quat_norm(y[:4])
    elif method == "rk45":
        y = _dp45(y, t0, dt, rhs, rtol)
        if renormalize:
            y[:4] /= quat_norm(y[:4])
    else:
        raise ValueError(f"unknown integration method {method!r}")
    return WristState(q=y[:4], omega=y[4:], t=t0 + dt)


def _dp45(y, t0, dt, rhs, rtol, atol=1e-12):
    t = 0.0
    h = dt
    while t < dt - 1e-15:
        h = min(h, dt - t)
        k = [rhs(y, t0 + t)]
        for row, c in zip(_DP_A[1:], _DP_C[1:]):
            y_stage = y + h * sum(a * ki for a, ki in zip(row, k))
            k.append(rhs(y_stage, t0 + t + c * h))
        y5 = y + h * sum(b * ki for b, ki in zip(_DP_B5, k))
        y4 = y + h * sum(b * ki for b, ki in zip(_DP_B4, k))
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        err = math.sqrt(float(np.mean(((y5 - y4) / scale) ** 2)))
        if err <= 1.0:
            t += h
            y = y5
        factor = 0.9 * (1.0 / err) ** 0.2 if err > 0.0 else 5.0
        h *= min(5.0, max(0.2, factor))
        if h < MIN_ADAPTIVE_STEP:
            raise IntegrationError(
                f"stiff dynamics: adaptive step collapsed below {MIN_ADAPTIVE_STEP}"
            )
    return y
