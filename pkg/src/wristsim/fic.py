"""Fractal impedance controller: branch logic, force/torque laws, energy.

The controller is a nonlinear spring with two branches.  While the tracking
displacement grows (divergence) it pulls back with the stiffness profile;
once the displacement peaks it switches to a linear spring anchored at half
the recorded peak (convergence), which carries the state back to the goal in
a single harmonic half cycle and arrives at rest.  Every completed excursion
therefore dissipates the energy it stored, without any explicit damping
term, while the instantaneous output torque stays bounded by the stiffness
times the peak displacement.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .rotations import quat_conj, quat_mul

#: displacement below which a converged excursion is considered closed
DEADBAND = 1e-6


class Mode(enum.Enum):
    DIVERGENCE = "divergence"
    CONVERGENCE = "convergence"


@dataclass(frozen=True)
class FicPhase:
    """Controller memory: branch selector and the peak displacement seen.

    ``disp_prev`` only feeds the displacement-rate estimate when the caller
    does not supply one; it carries no control authority of its own.
    """

    mode: Mode = Mode.DIVERGENCE
    disp_max: float = 0.0
    disp_prev: float = 0.0


@dataclass(frozen=True)
class FicParams:
    """Stiffness profile of the divergence branch.

    ``profile`` maps displacement to restoring force; ``None`` selects the
    linear law ``stiffness * disp``.
    """

    stiffness: float
    profile: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if not self.stiffness > 0.0:
            raise ValueError(f"stiffness must be positive, got {self.stiffness}")

    def restoring_force(self, disp: float) -> float:
        if self.profile is not None:
            return self.profile(disp)
        return self.stiffness * disp


def update_phase(
    phase: FicPhase, disp: float, disp_rate: float, deadband: float = DEADBAND
) -> FicPhase:
    """Advance the branch machine for the current displacement sample.

    Divergence holds while the displacement grows and records its running
    peak; the first non-growing sample hands over to convergence with the
    peak frozen.  Convergence resets to a fresh divergence once the
    displacement closes to within ``deadband`` of the goal.

    A divergence re-opened mid-convergence (the descent stalled or was
    disturbed before reaching the goal) tracks its own peak from the point
    of re-entry rather than inheriting the stale one.  Keeping the old peak
    would anchor the next convergence spring at half a displacement the
    motion no longer visits, whose repelling inner half can trap the state
    in a sustained limit cycle; re-anchoring makes every aborted descent
    shed its energy mismatch instead.
    """
    if disp < 0.0:
        raise ValueError("displacement must be non-negative")
    if phase.mode is Mode.CONVERGENCE and disp <= deadband:
        return FicPhase(Mode.DIVERGENCE, 0.0, disp)
    if disp_rate > 0.0 or disp > phase.disp_max:
        if phase.mode is Mode.DIVERGENCE:
            return FicPhase(Mode.DIVERGENCE, max(disp, phase.disp_max), disp)
        return FicPhase(Mode.DIVERGENCE, disp, disp)
    return FicPhase(Mode.CONVERGENCE, phase.disp_max, disp)


def fic_force_linear(disp: float, params: FicParams, phase: FicPhase) -> float:
    """Restoring force toward the goal (positive pulls the error down)."""
    if phase.mode is Mode.DIVERGENCE:
        return params.restoring_force(disp)
    if phase.disp_max <= 0.0:
        return 0.0
    gain = 2.0 * params.restoring_force(phase.disp_max) / phase.disp_max
    return gain * (disp - 0.5 * phase.disp_max)


def fic_potential_energy(disp: float, params: FicParams, phase: FicPhase) -> float:
    """Potential consistent with the branch force, continuous at the switch.

    Along either branch the sum of kinetic energy and this potential is an
    invariant of the autonomous motion; the discrete branch events can only
    remove energy from the ledger.
    """
    def stored_at(d: float) -> float:
        if params.profile is None:
            return 0.5 * params.stiffness * d * d
        return _quad_profile(params, d)

    if phase.mode is Mode.DIVERGENCE:
        return stored_at(disp)
    peak = phase.disp_max
    if peak <= 0.0:
        return 0.0
    gain = 2.0 * params.restoring_force(peak) / peak
    offset = stored_at(peak) - 0.5 * gain * (0.5 * peak) ** 2
    return 0.5 * gain * (disp - 0.5 * peak) ** 2 + offset


def _quad_profile(params: FicParams, disp: float, n: int = 512) -> float:
    xs = np.linspace(0.0, disp, n)
    return float(np.trapezoid([params.restoring_force(x) for x in xs], xs))


# ---------------------------------------------------------------------------
# quaternion (spherical joint) form
# ---------------------------------------------------------------------------


def torque_for_phase(
    q: np.ndarray,
    q_des: np.ndarray,
    stiffness: float,
    phase: FicPhase,
    axis_mode: str = "unit",
) -> tuple[np.ndarray, float]:
    """World-frame torque for a frozen branch state; returns (torque, angle).

    The orientation error is ``q_des * q^-1``; its rotation angle drives the
    branch force and its vector part gives the torque direction.  With
    ``axis_mode="unit"`` the torque acts along the unit error axis so its
    magnitude is exactly the branch force; ``"raw"`` scales by the
    unnormalized vector part instead (kept for comparison).
    """
    q_err = quat_mul(q_des, quat_conj(q))
    vec = q_err[1:]
    vec_norm = math.sqrt(vec[0] * vec[0] + vec[1] * vec[1] + vec[2] * vec[2])
    angle = 2.0 * math.atan2(vec_norm, q_err[0])
    if vec_norm < 1e-15:
        return np.zeros(3), angle
    params = FicParams(stiffness)
    magnitude = fic_force_linear(angle, params, phase)
    sign = 1.0 if q_err[0] > 0.0 else (-1.0 if q_err[0] < 0.0 else 0.0)
    if axis_mode == "unit":
        return sign * magnitude / vec_norm * vec, angle
    if axis_mode == "raw":
        return sign * magnitude * vec, angle
    raise ValueError(f"unknown axis mode {axis_mode!r}")


def fic_torque_quat(
    q: np.ndarray,
    q_des: np.ndarray,
    stiffness: float,
    phase: FicPhase,
    axis_mode: str = "unit",
    disp_rate: Optional[float] = None,
    deadband: float = DEADBAND,
) -> tuple[np.ndarray, float, FicPhase]:
    """One controller tick: update the branch machine, emit world torque.

    When ``disp_rate`` is not given it is estimated from the previous
    displacement stored in ``phase``.  Returns ``(torque, angle, phase')``.
    """
    q_err = quat_mul(q_des, quat_conj(q))
    vec = q_err[1:]
    vec_norm = math.sqrt(vec[0] * vec[0] + vec[1] * vec[1] + vec[2] * vec[2])
    angle = 2.0 * math.atan2(vec_norm, q_err[0])
    rate = angle - phase.disp_prev if disp_rate is None else disp_rate
    new_phase = update_phase(phase, angle, rate, deadband)
    torque, _ = torque_for_phase(q, q_des, stiffness, new_phase, axis_mode)
    return torque, angle, new_phase


# ---------------------------------------------------------------------------
# autonomous behaviour and the van der Pol equivalence
# ---------------------------------------------------------------------------


def simulate_release(
    params: FicParams,
    mass: float,
    start_disp: float,
    dt: Optional[float] = None,
    max_cycles: float = 2.0,
):
    """Integrate the autonomous point-mass release from rest at ``start_disp``.

    The state starts on the convergence branch with the peak at the release
    displacement, mirroring the end of a divergence stroke.  Integration is
    classical RK4 and stops when the displacement first crosses zero; the
    crossing time is refined by linear interpolation and a final partial
    step lands the record exactly on it.

    Returns ``(t, disp, vel, t_arrive)`` with sample arrays ending at the
    arrival state.
    """
    omega = math.sqrt(2.0 * params.restoring_force(start_disp) / (start_disp * mass))
    if dt is None:
        dt = (math.pi / omega) / 4000.0
    phase = FicPhase(Mode.CONVERGENCE, start_disp)

    def accel(x):
        return -fic_force_linear(x, params, phase) / mass

    def rk4(x, v, h):
        k1x, k1v = v, accel(x)
        k2x, k2v = v + 0.5 * h * k1v, accel(x + 0.5 * h * k1x)
        k3x, k3v = v + 0.5 * h * k2v, accel(x + 0.5 * h * k2x)
        k4x, k4v = v + h * k3v, accel(x + h * k3x)
        return (
            x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x),
            v + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v),
        )

    ts, xs, vs = [0.0], [start_disp], [0.0]
    t, x, v = 0.0, start_disp, 0.0
    t_end = max_cycles * math.pi / omega
    while t < t_end:
        x_new, v_new = rk4(x, v, dt)
        t += dt
        # arrival is a tangent touchdown: displacement reaches zero exactly
        # as the velocity does, so whichever numerical crossing shows first
        # locates it
        if x_new <= 0.0 or v < 0.0 <= v_new:
            if x_new <= 0.0:
                frac = x / (x - x_new)
            else:
                frac = v / (v - v_new)
            t_arrive = t - dt + frac * dt
            x_arr, v_arr = rk4(x, v, frac * dt)
            ts.append(t_arrive)
            xs.append(x_arr)
            vs.append(v_arr)
            return np.array(ts), np.array(xs), np.array(vs), t_arrive
        x, v = x_new, v_new
        ts.append(t)
        xs.append(x)
        vs.append(v)
    raise RuntimeError("release trajectory failed to reach the goal")


def vdp_equivalent_mu(
    peak_disp: float,
    params: FicParams,
    mass: float,
    extra_energy: float = 0.0,
    dt: Optional[float] = None,
) -> float:
    """Damping coefficient of the van der Pol oscillator matched to the FIC.

    Matches the energy the controller sheds over one excursion of amplitude
    ``peak_disp`` against the work a Lienard damping term ``(1 - x^2) x'``
    performs along the same trajectory.  The work integral is evaluated by
    trapezoidal quadrature over the simulated autonomous release (the
    differential form collapses to ``(1 - x^2) x'^2 dt`` along the path).
    ``extra_energy`` adds any stiffness-variation energy; zero for the
    constant-stiffness profile used here.
    """
    if peak_disp <= 0.0:
        raise ValueError("peak displacement must be positive")
    ts, xs, vs, _ = simulate_release(params, mass, peak_disp, dt=dt)
    damping_work = float(np.trapezoid((1.0 - xs**2) * vs**2, ts))
    if damping_work < 1e-12:
        raise ValueError("degenerate damping integral along the release path")
    k_at_peak = params.restoring_force(peak_disp) / peak_disp
    natural_freq_sq = k_at_peak / (2.0 * mass)
    numerator = (
        mass * natural_freq_sq * peak_disp**2
        + k_at_peak * peak_disp**2
        + extra_energy
    )
    return numerator / (2.0 * damping_work)
