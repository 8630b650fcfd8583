from dataclasses import replace
from pathlib import Path

import pytest

from src.config import ExperimentConfig, apply_overrides, load_config
from src.exceptions import ConfigError


@pytest.fixture
def no_env(tmp_path, monkeypatch):
    # setenv first so teardown also removes values a .env file loads
    for name in ("SPHERE_SIM_OUTPUT_DIR", "SPHERE_SIM_LOG_DIR", "SPHERE_SIM_LOG_LEVEL"):
        monkeypatch.setenv(name, "")
        monkeypatch.delenv(name)
    return tmp_path / "missing.env"


def test_defaults_are_valid():
    config = ExperimentConfig()
    config.validate()
    assert config.run_dir(2) == config.output_dir / "corridor" / "passive_excitation" / "repeat_2"


def test_load_config_from_experiment_file(tmp_path, no_env):
    path = tmp_path / "experiment.cfg"
    path.write_text(
        "# short tactical run\n"
        "experiment.scene = tactical\n"
        "experiment.duration = 5\n"
        "lidar.rays_per_frame = 500\n"
        "control.bridge_mode = interpolate\n"
        "control.oscillation_enabled = false\n"
        "control.longitudinal_gains = 1.0, 0.2, 0.0\n"
    )
    config = load_config(path, env_path=no_env)
    assert config.scene == "tactical"
    assert config.duration == 5.0
    assert config.lidar.rays_per_frame == 500
    assert config.control.bridge_mode == "interpolate"
    assert config.control.oscillation_enabled is False
    assert config.control.longitudinal_gains == (1.0, 0.2, 0.0)
    assert config.estimator.voxel_size == 0.5


def test_missing_experiment_file(tmp_path, no_env):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg", env_path=no_env)


def test_unknown_keys_are_all_reported():
    with pytest.raises(ConfigError) as info:
        apply_overrides(ExperimentConfig(), {"lidar.beams": "4", "warp.speed": "9", "experiment.seed": "x"})
    assert len(info.value.errors) == 3
    assert any(e.startswith("lidar.beams") for e in info.value.errors)


def test_nested_sections_cannot_be_overwritten():
    with pytest.raises(ConfigError):
        apply_overrides(ExperimentConfig(), {"experiment.lidar": "3"})


def test_validation_lists_every_problem():
    config = ExperimentConfig()
    config.duration = -1.0
    config.mode = "spinning"
    config.lidar.elevation_min_deg = 60.0
    with pytest.raises(ConfigError) as info:
        config.validate()
    keys = [e.split(":")[0] for e in info.value.errors]
    assert {"experiment.duration", "experiment.mode", "lidar.elevation_min_deg"} <= set(keys)


def test_rates_must_divide_physics_rate():
    config = ExperimentConfig()
    config.lidar.frame_rate = 7.0
    with pytest.raises(ConfigError, match="lidar.frame_rate"):
        config.validate()


def test_environment_sets_paths_and_overrides_win(tmp_path, no_env, monkeypatch):
    monkeypatch.setenv("SPHERE_SIM_OUTPUT_DIR", str(tmp_path / "env_out"))
    monkeypatch.setenv("SPHERE_SIM_LOG_LEVEL", "DEBUG")
    config = load_config(env_path=no_env)
    assert config.output_dir == tmp_path / "env_out"
    assert config.log_level == "DEBUG"

    config = load_config(env_path=no_env, overrides={"experiment.output_dir": str(tmp_path / "cli_out")})
    assert config.output_dir == tmp_path / "cli_out"


def test_dotenv_file_is_read(tmp_path, no_env):
    env_file = tmp_path / ".env"
    env_file.write_text(f"SPHERE_SIM_LOG_DIR={tmp_path / 'env_logs'}\n")
    config = load_config(env_path=env_file)
    assert config.log_dir == Path(tmp_path / "env_logs")


def test_config_hash_ignores_seed_and_paths(tmp_path):
    config = ExperimentConfig()
    reseeded = replace(config, seed=99, output_dir=tmp_path, workers=4)
    assert config.config_hash() == reseeded.config_hash()
    changed = replace(config, speed=0.7)
    assert changed.config_hash() != config.config_hash()


def test_path_and_resistance_settings_are_checked():
    config = ExperimentConfig()
    config.vehicle.rolling_resistance = -0.1
    config.control.loop_radius = 0.0
    config.control.line_length = -2.0
    with pytest.raises(ConfigError) as info:
        config.validate()
    keys = {e.split(":")[0] for e in info.value.errors}
    assert {"vehicle.rolling_resistance", "control.loop_radius", "control.line_length"} <= keys


@pytest.mark.parametrize("name", ["corridor_coverage.cfg", "tactical_dummy.cfg", "tactical_ramp.cfg"])
def test_bundled_experiment_files_load(name, no_env):
    path = Path(__file__).resolve().parent.parent / "experiments" / name
    config = load_config(path, env_path=no_env)
    assert config.duration > 0
    assert config.scene in ("corridor", "tactical")
