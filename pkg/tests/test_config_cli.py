"""Config parsing, condition expansion, and the command-line contract."""

import json
import math

import numpy as np
import pytest

from wristsim.cli import LISTING_COLUMNS, TRAJECTORY_COLUMNS, main
from wristsim.config import (
    ConfigError,
    ExperimentConfig,
    default_conditions,
    load_config,
)

DEFAULT_NAMES = [
    "online_single_target",
    "g_off_K10000_phi0",
    "g_on_K10000_phi0",
    "g_on_K8000_phi0",
    "g_on_K1000_phi0",
    "g_on_K10000_phiN25",
    "g_on_K8000_phiN25",
    "g_on_K1000_phiN25",
]


def write(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


# ---------------------------------------------------------------------------
# config loading
# ---------------------------------------------------------------------------


def test_empty_file_reproduces_defaults(tmp_path):
    cfg = load_config(write(tmp_path, ""))
    assert cfg == ExperimentConfig()
    assert [c.name for c in cfg.conditions] == DEFAULT_NAMES
    retune = cfg.condition("online_single_target")
    assert retune.kind == "retune" and retune.gravity
    neg = cfg.condition("g_on_K1000_phiN25")
    assert neg.stiffness == 1000.0
    assert neg.torsion == pytest.approx(math.radians(-25.0))


def test_default_condition_list_is_stable():
    assert [c.name for c in default_conditions()] == DEFAULT_NAMES


def test_unknown_keys_fail_with_dotted_path(tmp_path):
    with pytest.raises(ConfigError, match="unknown key 'body.masss'"):
        load_config(write(tmp_path, "body:\n  masss: 2.0\n"))
    with pytest.raises(ConfigError, match="unknown key 'speed'"):
        load_config(write(tmp_path, "speed: 11\n"))


def test_invalid_values_name_the_field(tmp_path):
    with pytest.raises(ConfigError, match="body.mass"):
        load_config(write(tmp_path, "body:\n  mass: -1.0\n"))
    with pytest.raises(ConfigError, match="task.dwell"):
        load_config(write(tmp_path, "task:\n  dwell: -0.5\n"))
    with pytest.raises(ConfigError, match="com_offset"):
        load_config(write(tmp_path, "body:\n  com_offset: [1.0, 2.0]\n"))
    with pytest.raises(ConfigError, match="not valid YAML"):
        load_config(write(tmp_path, "body: [unclosed\n"))


def test_sections_override_defaults(tmp_path):
    cfg = load_config(
        write(
            tmp_path,
            "body:\n  mass: 2.0\n"
            "task:\n  n_targets: 4\n"
            "sim:\n  substeps: 5\n"
            "output_dir: out\nseed: 7\n",
        )
    )
    assert cfg.body.mass == 2.0
    assert cfg.task.n_targets == 4
    assert cfg.sim.substeps == 5
    assert cfg.output_dir == "out"
    assert cfg.seed == 7
    # untouched sections keep their defaults
    assert cfg.band == ExperimentConfig().band


def test_explicit_conditions(tmp_path):
    cfg = load_config(
        write(
            tmp_path,
            "conditions:\n"
            "  - name: still\n    gravity: false\n"
            "  - name: soft\n    stiffness: 500.0\n    torsion_deg: -10.0\n",
        )
    )
    assert [c.name for c in cfg.conditions] == ["still", "soft"]
    assert not cfg.conditions[0].gravity
    assert cfg.conditions[1].torsion == pytest.approx(math.radians(-10.0))
    with pytest.raises(ConfigError, match="name"):
        load_config(write(tmp_path, "conditions:\n  - gravity: false\n"))


def test_sweep_expands_cartesian_product(tmp_path):
    cfg = load_config(
        write(
            tmp_path,
            "sweep:\n"
            "  gravity: [true, false]\n"
            "  torsion_deg: [0.0, -25.0]\n"
            "  stiffness: [10000.0, 1000.0]\n",
        )
    )
    names = [c.name for c in cfg.conditions]
    assert len(names) == 8
    assert names[0] == "g_on_K10000_phi0"
    assert "g_off_K1000_phiN25" in names
    assert len(set(names)) == 8


def test_stiffness_only_sweep_gives_one_condition_per_level(tmp_path):
    cfg = load_config(
        write(tmp_path, "sweep:\n  stiffness: [10000.0, 8000.0, 1000.0]\n")
    )
    assert [c.name for c in cfg.conditions] == [
        "g_on_K10000_phi0",
        "g_on_K8000_phi0",
        "g_on_K1000_phi0",
    ]


def test_conditions_and_sweep_are_exclusive(tmp_path):
    with pytest.raises(ConfigError, match="not both"):
        load_config(
            write(
                tmp_path,
                "conditions:\n  - name: a\n"
                "sweep:\n  stiffness: [1000.0]\n",
            )
        )


def test_duplicate_condition_names_rejected(tmp_path):
    with pytest.raises(ConfigError, match="duplicate"):
        load_config(
            write(tmp_path, "conditions:\n  - name: a\n  - name: a\n")
        )


def test_unknown_condition_lookup_lists_known():
    cfg = ExperimentConfig()
    with pytest.raises(ConfigError, match="online_single_target"):
        cfg.condition("nope")


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

# one-target task keeps the end-to-end runs around a quarter second each
QUICK = (
    "task:\n  n_targets: 1\n  dwell: 0.05\n"
    "conditions:\n  - name: quick\n    gravity: false\n"
)


def test_cli_runs_named_condition_into_out_dir(tmp_path, capsys):
    cfg = write(tmp_path, QUICK)
    out = tmp_path / "res"
    assert main(["run", str(cfg), "--condition", "quick", "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert printed.startswith("quick: rmse_y=")
    cond_dir = out / "quick"
    for fname in ("trajectory.csv", "metrics.json",
                  "listing_measured.csv", "listing_desired.csv"):
        assert (cond_dir / fname).is_file()
    assert (out / "summary.json").is_file()


def test_cli_unknown_condition_exits_2(tmp_path, capsys):
    cfg = write(tmp_path, QUICK)
    assert main(["run", str(cfg), "--condition", "nope"]) == 2
    assert "unknown condition" in capsys.readouterr().err


def test_cli_bad_config_exits_2(tmp_path, capsys):
    cfg = write(tmp_path, "body:\n  masss: 1\n")
    assert main(["run", str(cfg)]) == 2
    assert "unknown key" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.yaml")]) == 2


def test_trajectory_csv_layout(tmp_path):
    cfg = write(tmp_path, QUICK + "output_dir: " + str(tmp_path / "res") + "\n")
    assert main(["run", str(cfg)]) == 0
    path = tmp_path / "res" / "quick" / "trajectory.csv"
    header = path.read_text().splitlines()[0]
    assert header == ",".join(TRAJECTORY_COLUMNS)
    assert len(TRAJECTORY_COLUMNS) == 24
    # every column name carries its unit except the dimensionless quaternions
    for col in TRAJECTORY_COLUMNS:
        assert col == "t_s" or col.startswith(("q_", "qd_")) or col.endswith(
            ("_m", "_rad_s", "_Nm")
        )
    table = np.loadtxt(path, delimiter=",", skiprows=1)
    assert table.shape[1] == 24
    assert np.all(np.isfinite(table))
    np.testing.assert_allclose(np.diff(table[:, 0]), 1e-3, atol=1e-12)

    listing = tmp_path / "res" / "quick" / "listing_measured.csv"
    assert listing.read_text().splitlines()[0] == ",".join(LISTING_COLUMNS)
    cloud = np.loadtxt(listing, delimiter=",", skiprows=1)
    assert cloud.shape[1] == 3
    # degrees: the single reach tilts the pointer about 18 deg at peak
    assert 10.0 < np.max(np.abs(cloud)) < 45.0


def test_metrics_json_schema(tmp_path):
    cfg = write(tmp_path, QUICK)
    out = tmp_path / "res"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    metrics = json.loads((out / "quick" / "metrics.json").read_text())
    for key in (
        "condition", "kind", "gravity", "stiffness_Nm_rad", "torsion_rad",
        "samples", "rmse_y_m", "rmse_z_m", "rmse_target_y_m",
        "rmse_target_z_m", "effort_mean_Nm", "effort_std_Nm",
        "plane_fit", "plane_fit_desired",
    ):
        assert key in metrics
    assert metrics["condition"] == "quick"
    assert metrics["kind"] == "clock"
    summary = json.loads((out / "summary.json").read_text())
    assert [m["condition"] for m in summary] == ["quick"]


def test_repeated_runs_are_byte_identical(tmp_path):
    cfg = write(tmp_path, QUICK)
    outs = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        assert main(["run", str(cfg), "--out", str(out)]) == 0
        outs.append(out)
    for rel in (
        "quick/trajectory.csv", "quick/metrics.json",
        "quick/listing_measured.csv", "quick/listing_desired.csv",
        "summary.json",
    ):
        a = (outs[0] / rel).read_bytes()
        b = (outs[1] / rel).read_bytes()
        assert a == b, f"{rel} differs between runs"


def test_cli_check_flag_runs_invariant_suite(capsys):
    assert main(["run", "--check"]) == 0
    printed = capsys.readouterr().out
    assert "5/5 checks passed" in printed
    assert printed.count("[PASS]") == 5
