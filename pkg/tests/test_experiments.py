"""Task geometry, schedules, the trial loop, and the summary metrics."""

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wristsim.experiments import (
    ClockTask,
    ListingSurface,
    ParamSchedule,
    PointerParallelError,
    RankDeficientError,
    ReachProfile,
    SimOptions,
    Trajectory,
    build_clock_schedule,
    build_retune_schedule,
    compute_metrics,
    extract_listing,
    fit_plane,
    pointer_intersection,
    run_trial,
    target_rmse,
)
from wristsim.planner import BandParams, plan_reach, reach_duration
from wristsim.rotations import (
    project_to_sphere,
    quat_norm,
    torsion_about_pointer,
)


# ---------------------------------------------------------------------------
# task geometry
# ---------------------------------------------------------------------------


def test_targets_sit_on_the_circle(task):
    pts = task.targets
    assert pts.shape == (8, 3)
    np.testing.assert_allclose(pts[:, 0], task.plane_distance, rtol=0, atol=0)
    radii = np.linalg.norm(pts[:, 1:], axis=1)
    np.testing.assert_allclose(radii, task.radius, atol=1e-12)
    # first target is the top of the clock face
    np.testing.assert_allclose(pts[0], [0.3, 0.0, 0.1], atol=1e-12)


def test_negative_index_addresses_center(task):
    np.testing.assert_array_equal(task.position(-1), task.center)
    np.testing.assert_array_equal(task.position(0), task.targets[0])


def test_task_validation():
    with pytest.raises(ValueError):
        ClockTask(radius=0.0)
    with pytest.raises(ValueError):
        ClockTask(n_targets=0)
    with pytest.raises(ValueError):
        ClockTask(dwell=-0.1)


# ---------------------------------------------------------------------------
# parameter schedules
# ---------------------------------------------------------------------------


def test_schedule_lookup_is_piecewise_constant():
    sched = ParamSchedule(
        duration=1.0,
        stiffness_breaks=((0.0, 10000.0), (0.2, 8000.0)),
        torsion_breaks=((0.0, 0.0), (0.35, -0.4)),
        target_breaks=((0.05, 3), (0.5, -1)),
    )
    assert sched.stiffness_at(0.0) == 10000.0
    assert sched.stiffness_at(0.1999) == 10000.0
    assert sched.stiffness_at(0.2) == 8000.0
    assert sched.torsion_at(0.34) == 0.0
    assert sched.torsion_at(0.9) == -0.4
    assert sched.target_at(0.0) is None
    assert sched.target_at(0.05) == 3
    assert sched.target_at(0.7) == -1


def test_schedule_validation():
    with pytest.raises(ValueError, match="strictly increasing"):
        ParamSchedule(duration=1.0, stiffness_breaks=((0.0, 1.0), (0.0, 2.0)))
    with pytest.raises(ValueError, match="start at t=0"):
        ParamSchedule(duration=1.0, stiffness_breaks=((0.1, 1.0),))
    with pytest.raises(ValueError, match="positive"):
        ParamSchedule(duration=1.0, stiffness_breaks=((0.0, -5.0),))


def test_clock_schedule_walks_out_and_back(task, band):
    sched = build_clock_schedule(task, band, gravity=False)
    leg = reach_duration(task.radius, band) + task.dwell
    assert sched.duration == pytest.approx(2 * task.n_targets * leg)
    assert not sched.gravity
    # out legs aim at target k, return legs back at the center
    for k in range(task.n_targets):
        assert sched.target_at(2 * k * leg + 1e-9) == k
        assert sched.target_at((2 * k + 1) * leg + 1e-9) == -1
    assert sched.stiffness_at(sched.duration) == 10000.0


def test_retune_schedule_steps_inside_outgoing_leg(task, band):
    sched = build_retune_schedule(task, band)
    assert sched.target_at(0.0) is None
    assert sched.target_at(0.05) == 0
    assert sched.target_at(1.5) == -1
    assert [k for _, k in sched.stiffness_breaks] == [10000.0, 8000.0, 1000.0]
    assert sched.torsion_at(0.35) == pytest.approx(math.radians(-25.0))
    # both steps land while the outgoing reach is still in flight
    t_steps = [t for t, _ in sched.stiffness_breaks[1:]]
    t_steps.append(sched.torsion_breaks[-1][0])
    assert all(0.05 < t < 1.5 for t in t_steps)


# ---------------------------------------------------------------------------
# pointer ray
# ---------------------------------------------------------------------------


def test_pointer_intersection_identity():
    hit = pointer_intersection(np.array([1.0, 0.0, 0.0, 0.0]), 0.3)
    np.testing.assert_allclose(hit, [0.3, 0.0, 0.0], atol=0)


@given(
    y=st.floats(-0.25, 0.25),
    z=st.floats(-0.25, 0.25),
    phi=st.floats(-1.5, 1.5),
)
def test_projection_then_intersection_round_trips(y, z, phi):
    point = np.array([0.3, y, z])
    q = project_to_sphere(point, torsion=phi)
    np.testing.assert_allclose(pointer_intersection(q, 0.3), point, atol=1e-12)


def test_parallel_pointer_rejected():
    # +90 deg about y points the body x axis along -z, parallel to the plane
    s = math.sqrt(0.5)
    with pytest.raises(PointerParallelError):
        pointer_intersection(np.array([s, 0.0, s, 0.0]), 0.3)


# ---------------------------------------------------------------------------
# closed-form reach legs vs the integrated band
# ---------------------------------------------------------------------------


def test_reach_profile_matches_integrated_band(band):
    start = np.array([0.3, 0.0, 0.0])
    target = np.array([0.3, 0.0, 0.1])
    profile = ReachProfile.from_rest(start, target, band, 0.0)
    samples = plan_reach(start, target, band)
    worst_pos = worst_vel = 0.0
    for s in samples:
        if s.t >= profile.duration - 2e-3:
            continue  # the band snaps its sampled touchdown; compare before it
        pos, vel, _ = profile.sample(s.t)
        worst_pos = max(worst_pos, float(np.linalg.norm(pos - s.pos)))
        worst_vel = max(worst_vel, float(np.linalg.norm(vel - s.vel)))
    assert worst_pos < 1e-9
    assert worst_vel < 1e-7
    np.testing.assert_array_equal(samples[-1].pos, target)
    np.testing.assert_array_equal(samples[-1].vel, 0.0)


def test_reach_profile_endpoints(band):
    profile = ReachProfile.from_rest([0.3, 0.0, 0.0], [0.3, 0.0, 0.1], band, 0.2)
    pos0, vel0, _ = profile.sample(0.2)
    np.testing.assert_allclose(pos0, [0.3, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(vel0, 0.0, atol=1e-15)
    pos1, vel1, acc1 = profile.sample(0.2 + profile.duration + 1.0)
    np.testing.assert_array_equal(pos1, [0.3, 0.0, 0.1])
    np.testing.assert_array_equal(vel1, 0.0)
    np.testing.assert_array_equal(acc1, 0.0)
    # before t0 the profile holds the start point
    np.testing.assert_allclose(profile.sample(0.0)[0], [0.3, 0.0, 0.0], atol=1e-15)


def test_degenerate_reach_profile(band):
    profile = ReachProfile.from_rest([0.3, 0.0, 0.1], [0.3, 0.0, 0.1], band, 0.0)
    assert profile.duration == 0.0
    np.testing.assert_array_equal(profile.sample(0.5)[0], [0.3, 0.0, 0.1])


# ---------------------------------------------------------------------------
# trial loop
# ---------------------------------------------------------------------------


def short_schedule(gravity=False, stiffness=10000.0, torsion=0.0, duration=0.45):
    return ParamSchedule(
        duration=duration,
        gravity=gravity,
        stiffness_breaks=((0.0, stiffness),),
        torsion_breaks=((0.0, torsion),),
        target_breaks=((0.02, 0),),
    )


def test_run_trial_record_shape_and_sanity(task, body, band, opts):
    sched = short_schedule()
    traj = run_trial(sched, task, body, band, opts)
    n = int(round(sched.duration / opts.dt)) + 1
    assert len(traj) == n
    for field in ("plan_pos", "quat_des", "quat", "omega", "tau_cmd",
                  "tau_grav", "pointer", "err_angle", "disp_max", "stiffness"):
        assert np.all(np.isfinite(getattr(traj, field)))
    norms = np.array([quat_norm(q) for q in traj.quat])
    np.testing.assert_allclose(norms, 1.0, atol=1e-9)
    np.testing.assert_array_equal(traj.stiffness, 10000.0)
    # reach completes well inside the horizon: pointer lands on the target
    assert np.linalg.norm(traj.pointer[-1] - task.targets[0]) < 1e-4


def test_gravity_off_zeroes_gravity_torque(task, body, band, opts):
    traj = run_trial(short_schedule(gravity=False), task, body, band, opts)
    np.testing.assert_array_equal(traj.tau_grav, 0.0)
    traj_g = run_trial(short_schedule(gravity=True), task, body, band, opts)
    assert np.max(np.abs(traj_g.tau_grav)) > 0.1


def test_desired_stream_ignores_plant_conditions(task, body, band, opts):
    """Plan and desired pose never react to gravity or stiffness."""
    ref = run_trial(short_schedule(gravity=False), task, body, band, opts)
    for sched in (short_schedule(gravity=True),
                  short_schedule(gravity=True, stiffness=1000.0)):
        other = run_trial(sched, task, body, band, opts)
        np.testing.assert_array_equal(other.plan_pos, ref.plan_pos)
        np.testing.assert_array_equal(other.quat_des, ref.quat_des)


def test_desired_stream_carries_scheduled_torsion(task, body, band, opts):
    phi = math.radians(-25.0)
    traj = run_trial(short_schedule(torsion=phi), task, body, band, opts)
    twists = np.array([torsion_about_pointer(q) for q in traj.quat_des])
    np.testing.assert_allclose(twists, phi, atol=1e-8)


def test_engines_agree(task, body, band):
    """The scalar fast path reproduces the reference loop through K and
    torsion steps (tolerances far above the observed float-rounding gap)."""
    sched = build_retune_schedule(task, band, duration=0.5, gravity=True)
    fast = run_trial(sched, task, body, band, SimOptions(engine="fast"))
    ref = run_trial(sched, task, body, band, SimOptions(engine="reference"))
    np.testing.assert_array_equal(fast.plan_pos, ref.plan_pos)
    np.testing.assert_array_equal(fast.quat_des, ref.quat_des)
    assert np.max(np.abs(fast.quat - ref.quat)) < 1e-6
    assert np.max(np.abs(fast.omega - ref.omega)) < 1e-3
    assert np.max(np.abs(fast.tau_cmd - ref.tau_cmd)) < 1e-2


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def synthetic_trajectory(n=5):
    t = np.arange(n) * 1e-3
    plan = np.zeros((n, 3))
    plan[:, 0] = 0.3
    pointer = plan.copy()
    pointer[:, 1] += 0.002
    pointer[:, 2] += np.linspace(0.0, 0.004, n)
    tau = np.zeros((n, 3))
    tau[:, 1] = np.linspace(1.0, 2.0, n)
    quat = np.tile([1.0, 0.0, 0.0, 0.0], (n, 1))
    return Trajectory(
        t=t, plan_pos=plan, quat_des=quat.copy(), quat=quat,
        omega=np.zeros((n, 3)), tau_cmd=tau, tau_grav=np.zeros((n, 3)),
        pointer=pointer, err_angle=np.zeros(n), disp_max=np.zeros(n),
        stiffness=np.full(n, 1e4),
    )


def test_compute_metrics_formulas():
    traj = synthetic_trajectory()
    m = compute_metrics(traj)
    err = traj.pointer - traj.plan_pos
    assert m.rmse_y == pytest.approx(np.sqrt(np.mean(err[:, 1] ** 2)), rel=0)
    assert m.rmse_z == pytest.approx(np.sqrt(np.mean(err[:, 2] ** 2)), rel=0)
    effort = np.linalg.norm(traj.tau_cmd, axis=1)
    assert m.effort_mean == pytest.approx(np.mean(effort), rel=0)
    assert m.effort_std == pytest.approx(np.std(effort), rel=0)


def test_target_rmse_uses_scheduled_reference(task):
    traj = synthetic_trajectory()
    # target 0 active for the whole record: reference is (0.3, 0, 0.1)
    sched = ParamSchedule(duration=0.005, target_breaks=((0.0, 0),))
    ry, rz = target_rmse(traj, sched, task)
    err = traj.pointer - task.targets[0]
    assert ry == pytest.approx(np.sqrt(np.mean(err[:, 1] ** 2)), rel=0)
    assert rz == pytest.approx(np.sqrt(np.mean(err[:, 2] ** 2)), rel=0)


# ---------------------------------------------------------------------------
# torsion surface
# ---------------------------------------------------------------------------


def test_extract_listing_counts_gimbal_samples():
    ident = np.array([1.0, 0.0, 0.0, 0.0])
    s = math.sqrt(0.5)
    locked = np.array([s, 0.0, s, 0.0])  # pitch exactly 90 deg
    quats = np.array([ident, ident, locked, ident, locked])
    traj = synthetic_trajectory(n=5)
    traj.quat = quats
    surf = extract_listing([traj])
    assert surf.n_excluded == 2
    assert surf.theta_x.shape == (3,)
    np.testing.assert_allclose(surf.theta_x, 0.0, atol=0)


def test_extract_listing_source_selects_stream():
    traj = synthetic_trajectory(n=4)
    traj.quat_des = np.tile(
        project_to_sphere([0.3, 0.0, 0.1], torsion=0.2), (4, 1)
    )
    measured = extract_listing([traj], "measured")
    desired = extract_listing([traj], "desired")
    np.testing.assert_allclose(measured.theta_x, 0.0, atol=0)
    assert np.all(np.abs(desired.theta_x) > 0.1)
    with pytest.raises(ValueError, match="unknown source"):
        extract_listing([traj], "planned")


def test_fit_plane_recovers_synthetic_coefficients(rng):
    y = rng.uniform(-0.3, 0.3, 400)
    z = rng.uniform(-0.3, 0.3, 400)
    x = 0.31 * y - 0.17 * z + 0.045
    fit = fit_plane(ListingSurface(theta_y=y, theta_z=z, theta_x=x))
    assert fit.tilt_y == pytest.approx(0.31, abs=1e-12)
    assert fit.tilt_z == pytest.approx(-0.17, abs=1e-12)
    assert fit.offset == pytest.approx(0.045, abs=1e-12)
    assert fit.rms_residual < 1e-14


def test_fit_plane_rejects_collinear_cloud(rng):
    y = rng.uniform(-0.3, 0.3, 50)
    surf = ListingSurface(theta_y=y, theta_z=2.0 * y, theta_x=np.zeros(50))
    with pytest.raises(RankDeficientError):
        fit_plane(surf)
