"""Command-line surface: run configured experiments, emit logs and metrics.

Per condition the runner writes into ``<output_dir>/<condition>/``:

* ``trajectory.csv`` — one row per 1 ms sample, header names the columns
  with unit suffixes (SI throughout),
* ``metrics.json`` — scalar summary (RMSE, effort, plane fits),
* ``listing_measured.csv`` / ``listing_desired.csv`` — Euler point clouds
  in degrees (the one non-SI output, matching how such surfaces are
  usually plotted).

A cross-condition ``summary.json`` lands next to the condition folders.
Fixed-step runs are deterministic, so repeated runs of the same config
produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .checks import run_checks
from .config import Condition, ConfigError, ExperimentConfig, load_config
from .experiments import (
    RankDeficientError,
    Trajectory,
    build_clock_schedule,
    build_retune_schedule,
    compute_metrics,
    extract_listing,
    fit_plane,
    run_trial,
    target_rmse,
)

TRAJECTORY_COLUMNS = (
    "t_s",
    "xd_x_m", "xd_y_m", "xd_z_m",
    "qd_w", "qd_x", "qd_y", "qd_z",
    "q_w", "q_x", "q_y", "q_z",
    "omega_x_rad_s", "omega_y_rad_s", "omega_z_rad_s",
    "tau_c_x_Nm", "tau_c_y_Nm", "tau_c_z_Nm",
    "tau_g_x_Nm", "tau_g_y_Nm", "tau_g_z_Nm",
    "x_x_m", "x_y_m", "x_z_m",
)

LISTING_COLUMNS = ("theta_y_deg", "theta_z_deg", "theta_x_deg")


def condition_schedule(cond: Condition, cfg: ExperimentConfig):
    if cond.kind == "retune":
        return build_retune_schedule(cfg.task, cfg.band, gravity=cond.gravity)
    return build_clock_schedule(
        cfg.task, cfg.band,
        stiffness=cond.stiffness, torsion=cond.torsion, gravity=cond.gravity,
    )


def simulate_condition(cond: Condition, cfg: ExperimentConfig):
    schedule = condition_schedule(cond, cfg)
    traj = run_trial(schedule, cfg.task, cfg.body, cfg.band, cfg.sim)
    return schedule, traj


def trajectory_table(traj: Trajectory) -> np.ndarray:
    return np.column_stack(
        [
            traj.t, traj.plan_pos, traj.quat_des, traj.quat,
            traj.omega, traj.tau_cmd, traj.tau_grav, traj.pointer,
        ]
    )


def write_trajectory(path: Path, traj: Trajectory) -> None:
    np.savetxt(
        path,
        trajectory_table(traj),
        fmt="%.17g",
        delimiter=",",
        header=",".join(TRAJECTORY_COLUMNS),
        comments="",
    )


def write_listing(path: Path, surface) -> None:
    cloud = np.degrees(
        np.column_stack([surface.theta_y, surface.theta_z, surface.theta_x])
    )
    np.savetxt(
        path, cloud, fmt="%.17g", delimiter=",",
        header=",".join(LISTING_COLUMNS), comments="",
    )


def _plane_dict(fit) -> dict:
    return {
        "tilt_y": fit.tilt_y,
        "tilt_z": fit.tilt_z,
        "offset_rad": fit.offset,
        "rms_residual_rad": fit.rms_residual,
    }


def condition_metrics(cond: Condition, cfg, schedule, traj) -> dict:
    metrics = compute_metrics(traj)
    rmse_ty, rmse_tz = target_rmse(traj, schedule, cfg.task)
    out = {
        "condition": cond.name,
        "kind": cond.kind,
        "gravity": cond.gravity,
        "stiffness_Nm_rad": cond.stiffness if cond.kind == "clock" else None,
        "torsion_rad": cond.torsion if cond.kind == "clock" else None,
        "samples": len(traj),
        "rmse_y_m": metrics.rmse_y,
        "rmse_z_m": metrics.rmse_z,
        "rmse_target_y_m": rmse_ty,
        "rmse_target_z_m": rmse_tz,
        "effort_mean_Nm": metrics.effort_mean,
        "effort_std_Nm": metrics.effort_std,
    }
    for source, key in (("measured", "plane_fit"), ("desired", "plane_fit_desired")):
        try:
            out[key] = _plane_dict(fit_plane(extract_listing([traj], source)))
        except (RankDeficientError, ValueError):
            out[key] = None
    if cond.kind == "retune":
        err = np.linalg.norm(traj.pointer[-1] - traj.plan_pos[-1])
        speed = np.linalg.norm(np.diff(traj.pointer, axis=0), axis=1) / np.diff(traj.t)
        out["final_pointer_error_m"] = float(err)
        out["peak_pointer_speed_m_s"] = float(speed.max())
    return out


def emit_condition(cond: Condition, cfg: ExperimentConfig, out_root: Path) -> dict:
    schedule, traj = simulate_condition(cond, cfg)
    cond_dir = out_root / cond.name
    cond_dir.mkdir(parents=True, exist_ok=True)
    write_trajectory(cond_dir / "trajectory.csv", traj)
    write_listing(cond_dir / "listing_measured.csv", extract_listing([traj]))
    write_listing(cond_dir / "listing_desired.csv", extract_listing([traj], "desired"))
    metrics = condition_metrics(cond, cfg, schedule, traj)
    with open(cond_dir / "metrics.json", "w") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return metrics


def run_and_emit(cfg: ExperimentConfig, only: str | None = None) -> int:
    conditions = list(cfg.conditions)
    if only is not None:
        conditions = [cfg.condition(only)]
    out_root = Path(cfg.output_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    summary = []
    for cond in conditions:
        metrics = emit_condition(cond, cfg, out_root)
        summary.append(metrics)
        print(
            f"{cond.name}: rmse_y={metrics['rmse_y_m'] * 1e3:.3f}mm "
            f"rmse_z={metrics['rmse_z_m'] * 1e3:.3f}mm "
            f"effort={metrics['effort_mean_Nm']:.3f}"
            f"+-{metrics['effort_std_Nm']:.3f}Nm"
        )
    with open(out_root / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def run_check_suite(seed: int) -> int:
    results = run_checks(seed)
    failed = 0
    for res in results:
        tag = "PASS" if res.passed else "FAIL"
        print(f"[{tag}] {res.name}: {res.detail}")
        failed += not res.passed
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wristsim",
        description="Impedance-controlled wrist pointing experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="simulate configured conditions")
    run_p.add_argument(
        "config", nargs="?", default=None,
        help="YAML config file (omitted: built-in defaults)",
    )
    run_p.add_argument(
        "--check", action="store_true",
        help="run the invariant suite instead of simulating",
    )
    run_p.add_argument(
        "--condition", metavar="NAME", default=None,
        help="run a single named condition",
    )
    run_p.add_argument(
        "--out", metavar="DIR", default=None,
        help="override the configured output directory",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        if args.out:
            cfg = replace(cfg, output_dir=args.out)
        if args.check:
            return run_check_suite(cfg.seed)
        return run_and_emit(cfg, only=args.condition)
    except (ConfigError, OSError) as exc:
        print(f"wristsim: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # simulation failure: report, nonzero exit
        print(f"wristsim: simulation failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
