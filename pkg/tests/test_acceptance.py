"""
Full-length closed-loop runs comparing the sensor configurations.

Every test here simulates at least 20 s of the loop; run them with ``-m slow``.
"""
from dataclasses import replace
from pathlib import Path
from statistics import mean

import numpy as np
import pytest

from src.config import load_config
from src.control import reference_state
from src.processors import ExperimentProcessor, run_experiment

EXPERIMENTS = Path(__file__).resolve().parent.parent / "experiments"

pytestmark = pytest.mark.slow


def _config(name, tmp_path, **overrides):
    config = load_config(EXPERIMENTS / name, env_path=tmp_path / "missing.env", overrides=overrides)
    config.output_dir = tmp_path / "output"
    config.log_dir = tmp_path / "logs"
    return config


def _per_mode(config, modes):
    return {mode: run_experiment(replace(config, mode=mode), write=False) for mode in modes}


@pytest.fixture(scope="module")
def corridor_reports(tmp_path_factory):
    config = _config("corridor_coverage.cfg", tmp_path_factory.mktemp("corridor"))
    return _per_mode(config, ("fixed_horizontal", "static_tilt", "passive_excitation", "active_rotation"))


def test_completeness_ordering_in_the_corridor(corridor_reports):
    c = {mode: mean(r.completeness for r in reports) for mode, reports in corridor_reports.items()}
    assert all(len(reports) == 3 for reports in corridor_reports.values())
    assert c["active_rotation"] >= c["passive_excitation"]
    assert c["passive_excitation"] > c["static_tilt"] > c["fixed_horizontal"]
    assert c["passive_excitation"] - c["fixed_horizontal"] >= 0.15


def test_excitation_improves_registration_and_ground_coverage(corridor_reports):
    passive, fixed = corridor_reports["passive_excitation"], corridor_reports["fixed_horizontal"]
    assert mean(r.min_eigenvalue for r in passive) >= 2.0 * mean(r.min_eigenvalue for r in fixed)
    assert mean(r.near_ground_fraction for r in passive) > mean(r.near_ground_fraction for r in fixed)
    assert mean(r.elevation_entropy for r in passive) >= mean(r.elevation_entropy for r in fixed) + 0.5


def test_excitation_costs_little_tracking_accuracy(tmp_path):
    config = _config("corridor_coverage.cfg", tmp_path, **{"experiment.trajectory": "figure8",
                                                            "experiment.repeats": "1"})
    shaped = run_experiment(config, write=False)[0]
    config.control.oscillation_enabled = False
    plain = run_experiment(config, write=False)[0]
    assert shaped.mean_tracking_error <= plain.mean_tracking_error + 0.03
    assert shaped.mean_tracking_error <= 0.15


def test_robot_climbs_the_ramp_and_crosses_the_platform(tmp_path):
    config = _config("tactical_ramp.cfg", tmp_path, **{"experiment.repeats": "1"})
    processor = ExperimentProcessor(config)
    record = processor.simulate(seed=config.seed)
    table = record.trajectory_table()
    end = reference_state("line", config.speed, config.duration, (-4.0, -3.5, 0.0),
                          line_length=config.control.line_length).position
    assert np.all(np.isfinite(table.to_numpy()))
    assert table["err_m"].mean() <= 0.25
    assert np.linalg.norm(record.final_state.position[:2] - end) < 0.25
    assert record.final_state.position[2] == pytest.approx(0.125, abs=1e-9)


def test_excitation_reveals_the_dummy_in_the_pit(tmp_path):
    config = _config("tactical_dummy.cfg", tmp_path)
    reports = _per_mode(config, ("fixed_horizontal", "passive_excitation"))
    assert mean(r.target_recall for r in reports["passive_excitation"]) >= 0.5
    assert mean(r.target_recall for r in reports["fixed_horizontal"]) < 0.2


def test_minute_run_keeps_every_rate(tmp_path):
    config = _config("corridor_coverage.cfg", tmp_path, **{"lidar.rays_per_frame": "100"})
    record = ExperimentProcessor(config).simulate(seed=0)
    assert record.physics_ticks == 60_000
    assert record.control_ticks == 6_000
    assert record.frames == 600
    assert len(record.imu_samples) == 12_000
    assert record.final_state.t == pytest.approx(60.0)


def test_estimator_in_the_loop_stays_near_the_truth(tmp_path):
    config = _config("corridor_coverage.cfg", tmp_path, **{"experiment.trajectory": "figure8",
                                                            "experiment.control_mode": "estimator_in_loop",
                                                            "experiment.duration": "20"})
    record = ExperimentProcessor(config).simulate(seed=0)
    truth = {round(row[0], 6): np.array(row[3:5]) for row in record.control_rows}
    errors = [np.linalg.norm(p[:2] - truth[round(t, 6)]) for t, p, _ in record.estimates]
    assert len(errors) == 200
    assert max(errors) < 0.3
    assert record.degraded_frames < 20
