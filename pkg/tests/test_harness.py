import logging
import math
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from main import build_parser, collect_overrides, main
from src.exceptions import ConfigError, EmptySeriesError, MismatchedScenesError
from src.geometry import rot_y, rot_z
from src.metrics import RunReport
from src.processors import ComparisonProcessor, ExperimentProcessor, compare, mount_at, read_reports, run_experiment
from src.utils import ESTIMATE_COLUMNS, IMU_COLUMNS, TRAJECTORY_COLUMNS, read_ply


@pytest.fixture
def restore_logging():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    for handler in root.handlers[:]:
        if handler not in handlers:
            root.removeHandler(handler)
            handler.close()
    for handler in handlers:
        if handler not in root.handlers:
            root.addHandler(handler)
    root.setLevel(level)


def _report(mode, completeness, **changes):
    values = dict(scene="corridor", trajectory="figure8", mode=mode, control_mode="ground_truth",
                  repeat=0, seed=0, config_hash="abc", completeness=completeness,
                  mean_tracking_error=0.1, near_ground_fraction=0.2, elevation_entropy=3.0)
    values.update(changes)
    return RunReport(**values)


def test_one_second_run_has_exact_tick_counts(short_config):
    record = ExperimentProcessor(short_config).simulate(seed=0)
    assert record.physics_ticks == 1000
    assert record.control_ticks == 100
    assert record.frames == 10
    assert len(record.imu_samples) == 200
    assert record.final_state.t == pytest.approx(1.0)
    assert list(record.trajectory_table().columns) == TRAJECTORY_COLUMNS
    assert np.all(np.isfinite(record.trajectory_table().to_numpy()))


def test_runs_are_deterministic(short_config):
    first = ExperimentProcessor(short_config).simulate(seed=3)
    second = ExperimentProcessor(short_config).simulate(seed=3)
    pd.testing.assert_frame_equal(first.trajectory_table(), second.trajectory_table())
    np.testing.assert_array_equal(first.cloud(), second.cloud())


def test_repeats_use_consecutive_seeds_and_share_hash(short_config):
    short_config.repeats = 2
    short_config.seed = 10
    reports = run_experiment(short_config, write=False)
    assert [r.seed for r in reports] == [10, 11]
    assert [r.repeat for r in reports] == [0, 1]
    assert reports[0].config_hash == reports[1].config_hash
    for report in reports:
        assert 0.0 <= report.completeness <= 1.0
        assert report.frames == 10
        assert report.map_source == "true poses"


def test_baselines_freeze_attitude_except_passive(short_config):
    short_config.mode = "fixed_horizontal"
    state = ExperimentProcessor(short_config).simulate(seed=0).final_state
    assert abs(state.pitch) < 1e-12
    short_config.mode = "passive_excitation"
    state = ExperimentProcessor(short_config).simulate(seed=0).final_state
    assert state.pitch != 0.0


def test_mounts_per_baseline(short_config):
    short_config.mode = "fixed_horizontal"
    np.testing.assert_allclose(mount_at(short_config, 0.3).rotation, np.eye(3))
    short_config.mode = "static_tilt"
    np.testing.assert_allclose(mount_at(short_config, 0.3).rotation, rot_y(math.radians(15.0)))
    short_config.mode = "active_rotation"
    mount = mount_at(short_config, 0.5)
    np.testing.assert_allclose(mount.rotation, rot_z(math.pi / 2.0) @ rot_y(math.radians(30.0)), atol=1e-12)
    np.testing.assert_allclose(mount.translation, short_config.lidar.mount_offset)


def test_artifacts_are_written(short_config):
    report = run_experiment(short_config)[0]
    run_dir = short_config.run_dir(0)
    trajectory = pd.read_csv(run_dir / "trajectory.csv")
    assert list(trajectory.columns) == TRAJECTORY_COLUMNS
    assert len(trajectory) == 100
    assert list(pd.read_csv(run_dir / "imu.csv").columns) == IMU_COLUMNS
    assert len(read_ply(run_dir / "map.ply")) > 0
    row = pd.read_csv(run_dir / "report.csv").iloc[0]
    assert row["completeness"] == pytest.approx(report.completeness, abs=1e-6)
    assert "not evaluated (out of scope)" in (run_dir / "summary.txt").read_text()
    assert not (run_dir / "estimate.csv").exists()


def test_estimator_in_the_loop_run(short_config):
    short_config.control_mode = "estimator_in_loop"
    report = run_experiment(short_config)[0]
    assert report.map_source == "estimated poses"
    assert report.frames == 10
    estimate = pd.read_csv(short_config.run_dir(0) / "estimate.csv")
    assert list(estimate.columns) == ESTIMATE_COLUMNS
    assert len(estimate) == 10
    assert np.all(np.isfinite(estimate.to_numpy()))


def test_compare_needs_matching_reports():
    with pytest.raises(EmptySeriesError):
        compare([_report("static_tilt", 0.5)])
    with pytest.raises(MismatchedScenesError):
        compare([_report("static_tilt", 0.5), _report("static_tilt", 0.5, scene="lab")])


def test_compare_aggregates_per_mode():
    reports = [
        _report("static_tilt", 0.4),
        _report("static_tilt", 0.4, repeat=1, seed=1),
        _report("passive_excitation", 0.6),
        _report("passive_excitation", 0.8, repeat=1, seed=1),
    ]
    table = compare(reports)
    assert list(table["mode"]) == ["passive_excitation", "static_tilt"]
    assert table.loc[0, "completeness_mean"] == pytest.approx(0.7)
    assert table.loc[0, "completeness_spread"] == pytest.approx(0.1)
    assert table.loc[1, "completeness_spread"] == 0.0
    assert table.loc[1, "repeats"] == 2
    assert math.isnan(table.loc[1, "target_recall_mean"])


def test_reports_round_trip_through_disk(short_config):
    for mode in ("fixed_horizontal", "static_tilt"):
        run_experiment(replace(short_config, mode=mode))
    reports = read_reports(short_config.output_dir)
    assert sorted(r.mode for r in reports) == ["fixed_horizontal", "static_tilt"]
    assert len(compare(reports)) == 2


def test_cli_overrides():
    args = build_parser().parse_args(["run", "--seed", "4", "--mode", "static_tilt", "--control", "lio",
                                      "--set", "experiment.duration=2", "--set", "lidar.range_noise = 0"])
    overrides = collect_overrides(args)
    assert overrides == {
        "experiment.duration": "2",
        "lidar.range_noise": "0",
        "experiment.seed": "4",
        "experiment.mode": "static_tilt",
        "experiment.control_mode": "estimator_in_loop",
    }
    with pytest.raises(ConfigError):
        collect_overrides(build_parser().parse_args(["run", "--set", "experiment.duration"]))


def test_cli_run_writes_outputs(tmp_path, restore_logging):
    code = main(["run", "--out", str(tmp_path / "out"), "--set", f"experiment.log_dir={tmp_path / 'logs'}",
                 "--set", "experiment.duration=1", "--set", "experiment.repeats=1",
                 "--set", "lidar.rays_per_frame=200"])
    assert code == 0
    assert (tmp_path / "out" / "corridor" / "passive_excitation" / "repeat_0" / "report.csv").exists()
    assert list((tmp_path / "logs").glob("*.log"))


def test_cli_rejects_bad_configuration(tmp_path, restore_logging):
    assert main(["run", "--set", "experiment.duration=-1", "--set", f"experiment.log_dir={tmp_path}"]) == 1
    assert main(["run", "--set", "nonsense"]) == 1


def test_sweep_writes_one_row_per_value(short_config):
    table = ComparisonProcessor(short_config).sweep("control.oscillation_amplitude", ["0", "2"])
    assert list(table["value"]) == ["0", "2"]
    assert (table["repeats"] == 1).all()
    assert (short_config.output_dir / "sweep.csv").exists()
    assert (short_config.output_dir / "sweep.xlsx").exists()
    assert (short_config.output_dir / "control.oscillation_amplitude=2" / "corridor").is_dir()
    assert short_config.control.oscillation_amplitude == 7.0
