"""Clock-task experiments: schedules, closed-loop trials, metrics.

A trial couples three pieces at a 1 kHz control/recording rate:

* the elastic band plays a planned reach (closed form per leg, continuous
  in time inside the integrator),
* the planned position is projected to a desired pointer orientation with
  the scheduled torsion,
* the impedance controller torque drives the rigid-body plant.

Stiffness, torsion and the active target are piecewise-constant schedules,
so a single trial can sweep controller parameters online.  The planned
stream never looks at the measured state: deformation under gravity or low
stiffness is interaction, not re-planning, and the desired-pose stream is
bit-identical across those conditions.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import dynamics as _dyn
from .dynamics import BodyModel, gravity_torque
from .fic import DEADBAND, FicPhase, fic_torque_quat, torque_for_phase
from .planner import BandParams, band_stiffness_for_accel, reach_duration
from .rotations import (
    GimbalLockError,
    X_AXIS,
    euler_xyz_from_quat,
    project_to_sphere,
    rotate_vec,
)


class PointerParallelError(ValueError):
    """Raised when the pointer ray cannot pierce the target plane."""


class RankDeficientError(ValueError):
    """Raised when a plane fit has too little spread to be determined."""


# ---------------------------------------------------------------------------
# task geometry and schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClockTask:
    """Clock-face pointing task: targets on a circle in a frontal plane.

    Targets sit on a circle of ``radius`` in the plane ``x = plane_distance``
    (the joint is the origin), evenly spaced starting from the top and
    walking counter-clockwise in the y-z plane.  ``dwell`` is the hold time
    inserted after each reach.
    """

    plane_distance: float = 0.30
    radius: float = 0.10
    n_targets: int = 8
    dwell: float = 0.5

    def __post_init__(self):
        if not (self.plane_distance > 0.0 and self.radius > 0.0):
            raise ValueError("plane distance and radius must be positive")
        if self.n_targets < 1:
            raise ValueError("need at least one target")
        if self.dwell < 0.0:
            raise ValueError("dwell must be non-negative")

    @property
    def center(self) -> np.ndarray:
        return np.array([self.plane_distance, 0.0, 0.0])

    @property
    def targets(self) -> np.ndarray:
        angles = 0.5 * math.pi + 2.0 * math.pi / self.n_targets * np.arange(
            self.n_targets
        )
        out = np.empty((self.n_targets, 3))
        out[:, 0] = self.plane_distance
        out[:, 1] = self.radius * np.cos(angles)
        out[:, 2] = self.radius * np.sin(angles)
        return out

    def position(self, index: int) -> np.ndarray:
        """Target position by index; -1 addresses the circle center."""
        if index < 0:
            return self.center
        return self.targets[index]


@dataclass(frozen=True)
class ParamSchedule:
    """Piecewise-constant controller parameters and target sequence.

    Breakpoints are ``(time, value)`` pairs; each value holds from its time
    until the next breakpoint.  Target values index :class:`ClockTask`
    targets, with -1 for the center; before the first target breakpoint the
    plan holds the center.
    """

    duration: float
    gravity: bool = True
    stiffness_breaks: tuple = ((0.0, 10000.0),)
    torsion_breaks: tuple = ((0.0, 0.0),)
    target_breaks: tuple = ()

    def __post_init__(self):
        if not self.duration > 0.0:
            raise ValueError("duration must be positive")
        for name in ("stiffness_breaks", "torsion_breaks", "target_breaks"):
            breaks = tuple((float(t), v) for t, v in getattr(self, name))
            object.__setattr__(self, name, breaks)
            times = [t for t, _ in breaks]
            if any(b >= a for a, b in zip(times[1:], times)):
                raise ValueError(f"{name} times must be strictly increasing")
        if not self.stiffness_breaks or self.stiffness_breaks[0][0] > 0.0:
            raise ValueError("stiffness schedule must start at t=0")
        if not self.torsion_breaks or self.torsion_breaks[0][0] > 0.0:
            raise ValueError("torsion schedule must start at t=0")
        for _, k in self.stiffness_breaks:
            if not k > 0.0:
                raise ValueError(f"stiffness must be positive, got {k}")

    @staticmethod
    def _value_at(breaks, t, default):
        times = [b[0] for b in breaks]
        i = bisect_right(times, t)
        return breaks[i - 1][1] if i else default

    def stiffness_at(self, t: float) -> float:
        return self._value_at(self.stiffness_breaks, t, self.stiffness_breaks[0][1])

    def torsion_at(self, t: float) -> float:
        return self._value_at(self.torsion_breaks, t, self.torsion_breaks[0][1])

    def target_at(self, t: float) -> Optional[int]:
        return self._value_at(self.target_breaks, t, None)


def build_clock_schedule(
    task: ClockTask,
    band: BandParams,
    stiffness: float = 10000.0,
    torsion: float = 0.0,
    gravity: bool = True,
) -> ParamSchedule:
    """Center-out-and-back visit of every clock target in order.

    Each leg lasts one nominal reach duration plus the dwell; out legs aim
    at target k, return legs aim back at the center.
    """
    leg = reach_duration(task.radius, band) + task.dwell
    breaks = []
    for k in range(task.n_targets):
        breaks.append((2 * k * leg, k))
        breaks.append(((2 * k + 1) * leg, -1))
    return ParamSchedule(
        duration=2 * task.n_targets * leg,
        gravity=gravity,
        stiffness_breaks=((0.0, stiffness),),
        torsion_breaks=((0.0, torsion),),
        target_breaks=tuple(breaks),
    )


def build_retune_schedule(
    task: ClockTask,
    band: BandParams,
    stiffness_breaks: Sequence = ((0.0, 10000.0), (0.2, 8000.0), (0.3, 1000.0)),
    torsion_breaks: Sequence = ((0.0, 0.0), (0.35, math.radians(-25.0))),
    gravity: bool = True,
    target: int = 0,
    reach_start: float = 0.05,
    return_start: float = 1.5,
    duration: float = 2.5,
) -> ParamSchedule:
    """Out-and-back reach to one target with K and phi stepped mid-flight.

    Both parameter steps land inside the outgoing leg; the return leg runs
    entirely under the final (K, phi) pair, so its measured speed profile
    shows the recovered bell shape.
    """
    return ParamSchedule(
        duration=duration,
        gravity=gravity,
        stiffness_breaks=tuple(stiffness_breaks),
        torsion_breaks=tuple(torsion_breaks),
        target_breaks=((reach_start, target), (return_start, -1)),
    )


# ---------------------------------------------------------------------------
# closed-form reach legs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReachProfile:
    """One from-rest band leg in closed form (harmonic half cycle + clamp)."""

    start: np.ndarray
    target: np.ndarray
    t0: float
    dist: float
    omega: float
    duration: float
    unit: np.ndarray

    @classmethod
    def from_rest(cls, start, target, params: BandParams, t0: float) -> "ReachProfile":
        start = np.asarray(start, dtype=float)
        target = np.asarray(target, dtype=float)
        dist = float(np.linalg.norm(target - start))
        if dist <= 1e-12:
            return cls(target.copy(), target.copy(), t0, 0.0, 0.0, 0.0, np.zeros(3))
        k = params.stiffness
        if k is None:
            k = band_stiffness_for_accel(params.max_accel, dist, params.virtual_mass)
        omega = math.sqrt(2.0 * k / params.virtual_mass)
        return cls(start, target, t0, dist, omega, math.pi / omega, (target - start) / dist)

    def sample(self, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Planned (position, velocity, acceleration) at absolute time t."""
        rel = t - self.t0
        if self.dist == 0.0 or rel >= self.duration:
            return self.target.copy(), np.zeros(3), np.zeros(3)
        rel = max(rel, 0.0)
        half = 0.5 * self.dist
        remaining = half * (1.0 + math.cos(self.omega * rel))
        speed = half * self.omega * math.sin(self.omega * rel)
        accel = half * self.omega**2 * math.cos(self.omega * rel)
        return (
            self.target - remaining * self.unit,
            speed * self.unit,
            accel * self.unit,
        )


# ---------------------------------------------------------------------------
# trial runner
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimOptions:
    """Integration and controller options for a trial.

    The control/recording interval ``dt`` is split into ``substeps``
    integrator steps, and the controller branch machine advances at the
    substep rate too.  Ten substeps resolve the stiffest (twist) error mode
    at clock-task stiffness well enough for the branch switches to land on
    time; five is numerically stable but mistimed switches feed the residual
    ring instead of draining it.
    """

    dt: float = 1e-3
    method: str = "rk4"
    substeps: int = 10
    rtol: float = 1e-8
    torque_axis: str = "unit"
    twist_convention: str = "pointer"
    deadband: float = DEADBAND
    engine: str = "fast"


@dataclass
class Trajectory:
    """Uniformly sampled record of one trial (SI units, body-frame omega)."""

    t: np.ndarray
    plan_pos: np.ndarray
    quat_des: np.ndarray
    quat: np.ndarray
    omega: np.ndarray
    tau_cmd: np.ndarray
    tau_grav: np.ndarray
    pointer: np.ndarray
    err_angle: np.ndarray
    disp_max: np.ndarray
    stiffness: np.ndarray

    def __len__(self) -> int:
        return self.t.shape[0]


def pointer_intersection(q: np.ndarray, plane_distance: float) -> np.ndarray:
    """Point where the body x ray pierces the plane x = plane_distance."""
    ray = rotate_vec(q, X_AXIS)
    if abs(ray[0]) <= 1e-6:
        raise PointerParallelError(
            f"pointer ray {ray} is parallel to the target plane"
        )
    return plane_distance / ray[0] * ray


def run_trial(
    schedule: ParamSchedule,
    task: ClockTask,
    body: BodyModel,
    band: BandParams,
    opts: SimOptions = SimOptions(),
) -> Trajectory:
    """Simulate one scheduled trial and record it at the control rate."""
    if not schedule.gravity:
        body = replace(body, gravity=(0.0, 0.0, 0.0))
    n = int(round(schedule.duration / opts.dt))
    times = np.arange(n + 1) * opts.dt
    # piecewise-constant parameter streams on the sample grid
    stiff = np.array([schedule.stiffness_at(t) for t in times])
    torsion = np.array([schedule.torsion_at(t) for t in times])
    idx_stream = [schedule.target_at(t) for t in times]
    if opts.engine == "fast" and opts.method == "rk4":
        raw = _simulate_fast(times, stiff, torsion, idx_stream, task, body, band, opts)
    else:
        raw = _simulate_reference(
            times, stiff, torsion, idx_stream, task, body, band, opts
        )
    plan_pos, quat_des, quat, omega, tau_cmd, err_angle, disp_max = raw
    tau_grav = np.array([gravity_torque(quat[k], body) for k in range(n + 1)])
    pointer = np.array(
        [pointer_intersection(quat[k], task.plane_distance) for k in range(n + 1)]
    )
    return Trajectory(
        t=times,
        plan_pos=plan_pos,
        quat_des=quat_des,
        quat=quat,
        omega=omega,
        tau_cmd=tau_cmd,
        tau_grav=tau_grav,
        pointer=pointer,
        err_angle=err_angle,
        disp_max=disp_max,
        stiffness=stiff.copy(),
    )


def _simulate_reference(times, stiff, torsion, idx_stream, task, body, band, opts):
    """Trial loop written against the public module API (slow, exact spec)."""
    n = len(times) - 1
    plan_pos = np.empty((n + 1, 3))
    quat_des = np.empty((n + 1, 4))
    quat = np.empty((n + 1, 4))
    omega_rec = np.empty((n + 1, 3))
    tau_rec = np.empty((n + 1, 3))
    err_rec = np.empty(n + 1)
    dmax_rec = np.empty(n + 1)

    profile = ReachProfile.from_rest(task.center, task.center, band, 0.0)
    cur_idx: Optional[int] = None
    phase = FicPhase()
    state = _dyn.WristState(
        q=project_to_sphere(task.center, torsion=torsion[0],
                            twist_convention=opts.twist_convention),
        omega=np.zeros(3),
    )
    h = opts.dt / opts.substeps
    for k in range(n + 1):
        t_k = times[k]
        if idx_stream[k] is not None and idx_stream[k] != cur_idx:
            pos_now, _, _ = profile.sample(t_k)
            profile = ReachProfile.from_rest(
                pos_now, task.position(idx_stream[k]), band, t_k
            )
            cur_idx = idx_stream[k]
            phase = FicPhase()
        k_now, phi_now = stiff[k], torsion[k]

        def desired(t):
            return project_to_sphere(
                profile.sample(t)[0], torsion=phi_now,
                twist_convention=opts.twist_convention,
            )

        q_des_k = desired(t_k)
        tau_k, angle_k, phase = fic_torque_quat(
            state.q, q_des_k, k_now, phase,
            axis_mode=opts.torque_axis, deadband=opts.deadband,
        )
        plan_pos[k] = profile.sample(t_k)[0]
        quat_des[k] = q_des_k
        quat[k] = state.q
        omega_rec[k] = state.omega
        tau_rec[k] = tau_k
        err_rec[k] = angle_k
        dmax_rec[k] = phase.disp_max
        if k == n:
            break
        if opts.method == "rk4":
            for i in range(opts.substeps):
                t_sub = t_k + i * h
                if i > 0:
                    _, _, phase = fic_torque_quat(
                        state.q, desired(t_sub), k_now, phase,
                        axis_mode=opts.torque_axis, deadband=opts.deadband,
                    )
                frozen = phase

                def controller(q, w, t, _frozen=frozen):
                    return torque_for_phase(
                        q, desired(t), k_now, _frozen, axis_mode=opts.torque_axis
                    )[0]

                # pin the clock so stage times do not accumulate rounding
                state = _dyn.WristState(q=state.q, omega=state.omega, t=t_sub)
                state = _dyn.integrate_step(
                    state, controller, body, dt=h, method="rk4", substeps=1
                )
        else:
            frozen = phase

            def controller(q, w, t, _frozen=frozen):
                return torque_for_phase(
                    q, desired(t), k_now, _frozen, axis_mode=opts.torque_axis
                )[0]

            state = _dyn.WristState(q=state.q, omega=state.omega, t=t_k)
            state = _dyn.integrate_step(
                state, controller, body, dt=opts.dt, method="rk45", rtol=opts.rtol
            )
    return plan_pos, quat_des, quat, omega_rec, tau_rec, err_rec, dmax_rec


def _simulate_fast(times, stiff, torsion, idx_stream, task, body, band, opts):
    """Scalar-arithmetic twin of the reference loop (RK4 only).

    Kept free of array allocations in the inner stages; equivalence with
    the reference engine is pinned by tests to float rounding.
    """
    n = len(times) - 1
    plan_pos = np.empty((n + 1, 3))
    quat_des = np.empty((n + 1, 4))
    quat = np.empty((n + 1, 4))
    omega_rec = np.empty((n + 1, 3))
    tau_rec = np.empty((n + 1, 3))
    err_rec = np.empty(n + 1)
    dmax_rec = np.empty(n + 1)

    inertia = body.inertia
    ixx, ixy, ixz, iyx, iyy, iyz, izx, izy, izz = map(float, inertia.ravel())
    inv = np.linalg.inv(inertia)
    jxx, jxy, jxz, jyx, jyy, jyz, jzx, jzy, jzz = map(float, inv.ravel())
    mass = float(body.mass)
    cx, cy, cz = (float(v) for v in body.com_offset)
    gx, gy, gz = (float(v) for v in body.gravity)
    global_twist = opts.twist_convention == "global"
    raw_axis = opts.torque_axis == "raw"
    deadband = opts.deadband

    # profile scalars: start s_, target g_, unit u_, t0, omega, duration, dist
    profile = ReachProfile.from_rest(task.center, task.center, band, 0.0)

    def unpack_profile(p):
        # plain floats: numpy scalars would slow every inner-loop operation
        return (
            float(p.t0), float(p.dist), float(p.omega), float(p.duration),
            float(p.target[0]), float(p.target[1]), float(p.target[2]),
            float(p.unit[0]), float(p.unit[1]), float(p.unit[2]),
        )

    t0, dist, omega_p, dur, gx_t, gy_t, gz_t, ux, uy, uz = unpack_profile(profile)

    def plan_at(t):
        rel = t - t0
        if dist == 0.0 or rel >= dur:
            return gx_t, gy_t, gz_t
        if rel < 0.0:
            rel = 0.0
        rem = 0.5 * dist * (1.0 + math.cos(omega_p * rel))
        return gx_t - rem * ux, gy_t - rem * uy, gz_t - rem * uz

    def project(px, py, pz, cr, sr):
        norm = math.sqrt(px * px + py * py + pz * pz)
        rx, ry, rz = px / norm, py / norm, pz / norm
        w0 = 1.0 + rx
        if w0 <= 1e-15:
            a, b, c = 0.0, 0.0, 1.0
        else:
            m = math.sqrt(w0 * w0 + rz * rz + ry * ry)
            a, b, c = w0 / m, -rz / m, ry / m
        if global_twist:
            # roll about the world x axis applied after the swing
            qw, qx, qy, qz = cr * a, sr * a, cr * b - sr * c, cr * c + sr * b
        else:
            qw, qx, qy, qz = a * cr, a * sr, b * cr + c * sr, c * cr - b * sr
        if qw < 0.0:
            return -qw, -qx, -qy, -qz
        return qw, qx, qy, qz

    def torque(qw, qx, qy, qz, dw, dx, dy, dz, k_now, mode_div, dmax):
        ew = dw * qw + dx * qx + dy * qy + dz * qz
        ex = dx * qw - dw * qx - dy * qz + dz * qy
        ey = dx * qz - dw * qy + dy * qw - dz * qx
        ez = -dw * qz - dx * qy + dy * qx + dz * qw
        vn = math.sqrt(ex * ex + ey * ey + ez * ez)
        angle = 2.0 * math.atan2(vn, ew)
        if vn < 1e-15:
            return 0.0, 0.0, 0.0, angle
        if mode_div:
            mag = k_now * angle
        elif dmax > 0.0:
            mag = 2.0 * (k_now * dmax) / dmax * (angle - 0.5 * dmax)
        else:
            mag = 0.0
        sign = 1.0 if ew > 0.0 else (-1.0 if ew < 0.0 else 0.0)
        scale = sign * mag if raw_axis else sign * mag / vn
        return scale * ex, scale * ey, scale * ez, angle

    def deriv(qw, qx, qy, qz, wx, wy, wz, t, k_now, cr, sr, mode_div, dmax):
        px, py, pz = plan_at(t)
        dw, dx, dy, dz = project(px, py, pz, cr, sr)
        tw_x, tw_y, tw_z, _ = torque(qw, qx, qy, qz, dw, dx, dy, dz,
                                     k_now, mode_div, dmax)
        # world -> body for the control torque and gravity
        tbx, tby, tbz = _rot_inv(qw, qx, qy, qz, tw_x, tw_y, tw_z)
        gbx, gby, gbz = _rot_inv(qw, qx, qy, qz, gx, gy, gz)
        mgx, mgy, mgz = mass * gbx, mass * gby, mass * gbz
        tbx += cy * mgz - cz * mgy
        tby += cz * mgx - cx * mgz
        tbz += cx * mgy - cy * mgx
        # gyroscopic term
        lx = ixx * wx + ixy * wy + ixz * wz
        ly = iyx * wx + iyy * wy + iyz * wz
        lz = izx * wx + izy * wy + izz * wz
        tbx -= wy * lz - wz * ly
        tby -= wz * lx - wx * lz
        tbz -= wx * ly - wy * lx
        ax = jxx * tbx + jxy * tby + jxz * tbz
        ay = jyx * tbx + jyy * tby + jyz * tbz
        az = jzx * tbx + jzy * tby + jzz * tbz
        return (
            0.5 * (-qx * wx - qy * wy - qz * wz),
            0.5 * (qw * wx + qy * wz - qz * wy),
            0.5 * (qw * wy - qx * wz + qz * wx),
            0.5 * (qw * wz + qx * wy - qy * wx),
            ax, ay, az,
        )

    # initial state: at the plan start pose, at rest
    phi0 = float(torsion[0])
    qw, qx, qy, qz = project(float(task.center[0]), float(task.center[1]),
                             float(task.center[2]),
                             math.cos(0.5 * phi0), math.sin(0.5 * phi0))
    wx = wy = wz = 0.0
    mode_div, dmax, dprev = True, 0.0, 0.0
    cur_idx: Optional[int] = None
    h = opts.dt / opts.substeps
    stiff_f = [float(v) for v in stiff]
    torsion_f = [float(v) for v in torsion]
    times_f = [float(v) for v in times]

    for k in range(n + 1):
        t_k = times_f[k]
        if idx_stream[k] is not None and idx_stream[k] != cur_idx:
            pos_now = np.array(plan_at(t_k))
            profile = ReachProfile.from_rest(
                pos_now, task.position(idx_stream[k]), band, t_k
            )
            (t0, dist, omega_p, dur,
             gx_t, gy_t, gz_t, ux, uy, uz) = unpack_profile(profile)
            cur_idx = idx_stream[k]
            mode_div, dmax, dprev = True, 0.0, 0.0
        k_now = stiff_f[k]
        cr, sr = math.cos(0.5 * torsion_f[k]), math.sin(0.5 * torsion_f[k])

        px, py, pz = plan_at(t_k)
        dw, dx, dy, dz = project(px, py, pz, cr, sr)
        # sample-boundary controller tick
        angle = _err_angle(qw, qx, qy, qz, dw, dx, dy, dz)
        mode_div, dmax, dprev = _phase_tick(mode_div, dmax, dprev, angle, deadband)
        tcx, tcy, tcz, _ = torque(qw, qx, qy, qz, dw, dx, dy, dz, k_now,
                                  mode_div, dmax)

        plan_pos[k] = px, py, pz
        quat_des[k] = dw, dx, dy, dz
        quat[k] = qw, qx, qy, qz
        omega_rec[k] = wx, wy, wz
        tau_rec[k] = tcx, tcy, tcz
        err_rec[k] = angle
        dmax_rec[k] = dmax
        if k == n:
            break

        for i in range(opts.substeps):
            t_sub = t_k + i * h
            if i > 0:
                px, py, pz = plan_at(t_sub)
                dw, dx, dy, dz = project(px, py, pz, cr, sr)
                angle = _err_angle(qw, qx, qy, qz, dw, dx, dy, dz)
                mode_div, dmax, dprev = _phase_tick(
                    mode_div, dmax, dprev, angle, deadband
                )
            y = (qw, qx, qy, qz, wx, wy, wz)
            k1 = deriv(*y, t_sub, k_now, cr, sr, mode_div, dmax)
            y2 = tuple(y[j] + 0.5 * h * k1[j] for j in range(7))
            k2 = deriv(*y2, t_sub + 0.5 * h, k_now, cr, sr, mode_div, dmax)
            y3 = tuple(y[j] + 0.5 * h * k2[j] for j in range(7))
            k3 = deriv(*y3, t_sub + 0.5 * h, k_now, cr, sr, mode_div, dmax)
            y4 = tuple(y[j] + h * k3[j] for j in range(7))
            k4 = deriv(*y4, t_sub + h, k_now, cr, sr, mode_div, dmax)
            qw, qx, qy, qz, wx, wy, wz = (
                y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
                for j in range(7)
            )
            norm = math.sqrt(qw * qw + qx * qx + qy * qy + qz * qz)
            qw, qx, qy, qz = qw / norm, qx / norm, qy / norm, qz / norm

    return plan_pos, quat_des, quat, omega_rec, tau_rec, err_rec, dmax_rec


def _phase_tick(mode_div, dmax, dprev, disp, deadband):
    """Scalar mirror of :func:`wristsim.fic.update_phase`."""
    rate = disp - dprev
    if not mode_div and disp <= deadband:
        return True, 0.0, disp
    if rate > 0.0 or disp > dmax:
        if mode_div:
            return True, disp if disp > dmax else dmax, disp
        return True, disp, disp
    return False, dmax, disp


def _err_angle(qw, qx, qy, qz, dw, dx, dy, dz):
    """Rotation angle of the error quaternion d * conj(q), sign included."""
    ew = dw * qw + dx * qx + dy * qy + dz * qz
    ex = dx * qw - dw * qx - dy * qz + dz * qy
    ey = dx * qz - dw * qy + dy * qw - dz * qx
    ez = -dw * qz - dx * qy + dy * qx + dz * qw
    return 2.0 * math.atan2(math.sqrt(ex * ex + ey * ey + ez * ez), ew)


def _rot_inv(qw, qx, qy, qz, vx, vy, vz):
    """Rotate a world vector into the body frame (conjugate rotation)."""
    tx = 2.0 * (vy * qz - vz * qy)
    ty = 2.0 * (vz * qx - vx * qz)
    tz = 2.0 * (vx * qy - vy * qx)
    return (
        vx + qw * tx - qy * tz + qz * ty,
        vy + qw * ty - qz * tx + qx * tz,
        vz + qw * tz - qx * ty + qy * tx,
    )


# ---------------------------------------------------------------------------
# metrics and the torsion surface
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrialMetrics:
    rmse_y: float
    rmse_z: float
    effort_mean: float
    effort_std: float


def compute_metrics(traj: Trajectory) -> TrialMetrics:
    """Tracking error against the plan plus commanded-torque effort."""
    err = traj.pointer - traj.plan_pos
    effort = np.linalg.norm(traj.tau_cmd, axis=1)
    return TrialMetrics(
        rmse_y=float(np.sqrt(np.mean(err[:, 1] ** 2))),
        rmse_z=float(np.sqrt(np.mean(err[:, 2] ** 2))),
        effort_mean=float(np.mean(effort)),
        effort_std=float(np.std(effort)),
    )


def target_rmse(
    traj: Trajectory, schedule: ParamSchedule, task: ClockTask
) -> tuple[float, float]:
    """Alternative error: pointer against the scheduled target position."""
    ref = np.empty_like(traj.pointer)
    for k, t in enumerate(traj.t):
        idx = schedule.target_at(t)
        ref[k] = task.center if idx is None else task.position(idx)
    err = traj.pointer - ref
    return (
        float(np.sqrt(np.mean(err[:, 1] ** 2))),
        float(np.sqrt(np.mean(err[:, 2] ** 2))),
    )


@dataclass(frozen=True)
class ListingSurface:
    """Euler-angle point cloud (x torsion as a function of y and z)."""

    theta_y: np.ndarray
    theta_z: np.ndarray
    theta_x: np.ndarray
    n_excluded: int = 0


@dataclass(frozen=True)
class PlaneFit:
    tilt_y: float
    tilt_z: float
    offset: float
    rms_residual: float


def extract_listing(
    trajectories: Sequence[Trajectory], source: str = "measured"
) -> ListingSurface:
    """Pool the intrinsic x-y-z Euler decomposition over trials.

    ``source`` selects the measured (``"measured"``) or planned
    (``"desired"``) orientation stream.  Samples inside the gimbal-lock
    guard band are excluded and counted.
    """
    if source not in ("measured", "desired"):
        raise ValueError(f"unknown source {source!r}")
    ys, zs, xs = [], [], []
    excluded = 0
    for traj in trajectories:
        quats = traj.quat if source == "measured" else traj.quat_des
        for q in quats:
            try:
                ax, ay, az = euler_xyz_from_quat(q)
            except GimbalLockError:
                excluded += 1
                continue
            xs.append(ax)
            ys.append(ay)
            zs.append(az)
    if not xs:
        raise ValueError("no usable samples outside the gimbal guard band")
    return ListingSurface(
        theta_y=np.array(ys),
        theta_z=np.array(zs),
        theta_x=np.array(xs),
        n_excluded=excluded,
    )


def fit_plane(surface: ListingSurface) -> PlaneFit:
    """Least-squares plane theta_x = a*theta_y + b*theta_z + c."""
    design = np.column_stack(
        [surface.theta_y, surface.theta_z, np.ones_like(surface.theta_y)]
    )
    coef, _, rank, _ = np.linalg.lstsq(design, surface.theta_x, rcond=None)
    if rank < 3:
        raise RankDeficientError(
            "surface samples do not span a plane (collinear or too few)"
        )
    residual = design @ coef - surface.theta_x
    return PlaneFit(
        tilt_y=float(coef[0]),
        tilt_z=float(coef[1]),
        offset=float(coef[2]),
        rms_residual=float(np.sqrt(np.mean(residual**2))),
    )
