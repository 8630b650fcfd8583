"""
Configuration settings and constants for the spherical robot simulator.

Experiment files are flat ``section.key = value`` lines (comments start with
``#``), parsed with python-dotenv. Values not given in the file keep the
dataclass defaults. Parameters marked "invented" have no published value and
are plausible defaults only.
"""
import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from ..exceptions import ConfigError

GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0

SCENE_KINDS = ("lab", "corridor", "tactical")
TRAJECTORY_KINDS = ("figure8", "circle", "oval", "line", "loop")
BASELINE_MODES = ("fixed_horizontal", "static_tilt", "active_rotation", "passive_excitation")
CONTROL_MODES = ("ground_truth", "estimator_in_loop")
BRIDGE_MODES = ("hold", "interpolate")


@dataclass
class VehicleConfig:
    """Drive unit and shell parameters."""
    wheel_radius: float = 0.05            # invented
    track_width: float = 0.20             # invented
    drive_mass_fraction: float = 0.5      # invented
    drive_offset_radius: float = 0.08     # invented
    shell_radius: float = 0.125           # 25 cm shell
    total_mass: float = 1.8
    inertia: Tuple[float, float, float] = (0.012, 0.012, 0.012)  # invented, diagonal
    contact_damping: float = 0.02         # invented, tilt damping N m s/rad
    rolling_resistance: float = 0.05      # invented, N m s/rad, sets the drive lean
    gravity: float = 9.81
    max_wheel_speed: float = 25.0
    motor_time_constant: float = 0.1      # invented
    drive_damping: float = 2.0            # invented, pendulum mode 1/s
    physics_rate: float = 1000.0


@dataclass
class LidarConfig:
    """Scan pattern, noise and mounting of the LiDAR."""
    rays_per_frame: int = 2000
    frame_rate: float = 10.0
    elevation_min_deg: float = -7.0
    elevation_max_deg: float = 52.0
    max_range: float = 40.0
    range_noise: float = 0.02
    mount_offset: Tuple[float, float, float] = (0.0, 0.0, 0.125)
    static_tilt_deg: float = 15.0
    active_rotation_rate: float = 0.5     # rev/s
    active_tilt_deg: float = 30.0


@dataclass
class ImuConfig:
    rate: float = 200.0
    gyro_noise: float = 0.01
    accel_noise: float = 0.05
    gyro_bias: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    accel_bias: Tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass
class ControlConfig:
    """Tracking controller, trajectory placement and oscillation shaping."""
    rate: float = 100.0
    longitudinal_gains: Tuple[float, float, float] = (1.2, 0.1, 0.05)
    heading_gains: Tuple[float, float, float] = (2.0, 0.0, 0.1)
    cross_track_gain: float = 2.0
    integral_clamp: float = 0.5
    max_linear_speed: float = 1.25
    max_angular_speed: float = 6.0
    bridge_mode: str = "hold"
    oscillation_enabled: bool = True
    oscillation_amplitude: float = 7.0
    oscillation_f1: float = 1.2           # near the shell tilt resonance
    oscillation_f2: float = 1.2 * GOLDEN_RATIO
    loop_radius: float = 1.35
    line_length: float = 7.0


@dataclass
class EstimatorConfig:
    voxel_size: float = 0.5
    min_plane_points: int = 6
    planarity_ratio: float = 0.1
    max_iterations: int = 10
    step_tolerance: float = 1e-6
    max_backtracks: int = 8
    min_correspondences: int = 10
    lidar_sigma: float = 0.02
    gyro_noise: float = 0.01
    accel_noise: float = 0.05
    bias_random_walk: float = 1e-3
    degeneracy_threshold: float = 1.0
    max_points: int = 800


@dataclass
class MetricsConfig:
    voxel_resolution: float = 0.1
    near_ground_height: float = 0.3
    near_ground_radius: float = 3.0
    entropy_bins: int = 36


@dataclass
class ExperimentConfig:
    """Everything a run needs; a run is a pure function of this object."""
    scene: str = "corridor"
    trajectory: str = "figure8"
    speed: float = 0.5
    mode: str = "passive_excitation"
    control_mode: str = "ground_truth"
    duration: float = 60.0
    repeats: int = 3
    seed: int = 0
    scene_file: str = ""                  # optional CSV scene replacing the built-in kind
    workers: int = 1
    vehicle: VehicleConfig = field(default_factory=VehicleConfig)
    lidar: LidarConfig = field(default_factory=LidarConfig)
    imu: ImuConfig = field(default_factory=ImuConfig)
    control: ControlConfig = field(default_factory=ControlConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)

    # File paths
    base_dir: Path = Path(__file__).parent.parent.parent
    output_dir: Path = base_dir / "output"
    log_dir: Path = base_dir / "logs"
    log_level: str = "INFO"
    log_format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    @property
    def log_file_path(self) -> Path:
        """Get the full path to the log file"""
        timestamp = datetime.now().strftime("%Y%m%d")
        return self.log_dir / f"sphere_sim_{timestamp}.log"

    def run_dir(self, repeat: int) -> Path:
        return self.output_dir / self.scene / self.mode / f"repeat_{repeat}"

    def validate(self) -> None:
        """
        Check every field and raise one error listing all problems.

        Raises:
            ConfigError: with one message per offending field
        """
        errors: List[str] = []

        def check(ok: bool, key: str, message: str):
            if not ok:
                errors.append(f"{key}: {message}")

        check(self.scene in SCENE_KINDS, "experiment.scene", f"must be one of {SCENE_KINDS}")
        check(self.trajectory in TRAJECTORY_KINDS, "experiment.trajectory", f"must be one of {TRAJECTORY_KINDS}")
        check(self.mode in BASELINE_MODES, "experiment.mode", f"must be one of {BASELINE_MODES}")
        check(self.control_mode in CONTROL_MODES, "experiment.control_mode", f"must be one of {CONTROL_MODES}")
        check(self.duration > 0, "experiment.duration", "must be > 0")
        check(self.repeats >= 1, "experiment.repeats", "must be >= 1")
        check(self.seed >= 0, "experiment.seed", "must be >= 0")
        check(self.speed > 0, "experiment.speed", "must be > 0")
        check(self.workers >= 1, "experiment.workers", "must be >= 1")
        check(not self.scene_file or Path(self.scene_file).exists(), "experiment.scene_file", "file not found")

        v = self.vehicle
        check(v.wheel_radius > 0, "vehicle.wheel_radius", "must be > 0")
        check(v.track_width > 0, "vehicle.track_width", "must be > 0")
        check(0 < v.drive_mass_fraction < 1, "vehicle.drive_mass_fraction", "must be in (0, 1)")
        check(v.shell_radius > 0, "vehicle.shell_radius", "must be > 0")
        check(0 <= v.drive_offset_radius < v.shell_radius, "vehicle.drive_offset_radius",
              "must be in [0, shell_radius)")
        check(v.total_mass > 0, "vehicle.total_mass", "must be > 0")
        check(all(i > 0 for i in v.inertia), "vehicle.inertia", "diagonal entries must be > 0")
        check(v.contact_damping >= 0, "vehicle.contact_damping", "must be >= 0")
        check(v.rolling_resistance >= 0, "vehicle.rolling_resistance", "must be >= 0")
        check(v.max_wheel_speed > 0, "vehicle.max_wheel_speed", "must be > 0")
        check(v.motor_time_constant > 0, "vehicle.motor_time_constant", "must be > 0")
        check(v.physics_rate >= 100, "vehicle.physics_rate", "time step must be <= 0.01 s")

        lc = self.lidar
        check(lc.rays_per_frame > 0, "lidar.rays_per_frame", "must be > 0")
        check(lc.frame_rate > 0, "lidar.frame_rate", "must be > 0")
        check(-90 < lc.elevation_min_deg < lc.elevation_max_deg < 90, "lidar.elevation_min_deg",
              "elevation range must lie within (-90, 90) and be increasing")
        check(lc.range_noise >= 0, "lidar.range_noise", "must be >= 0")
        check(lc.max_range > 0, "lidar.max_range", "must be > 0")
        check(0 < lc.static_tilt_deg <= 30, "lidar.static_tilt_deg", "must be in (0, 30]")
        check(lc.active_rotation_rate > 0, "lidar.active_rotation_rate", "must be > 0")

        check(self.imu.rate > 0, "imu.rate", "must be > 0")
        check(self.imu.gyro_noise >= 0 and self.imu.accel_noise >= 0, "imu.gyro_noise", "noise must be >= 0")

        c = self.control
        check(all(g >= 0 for g in c.longitudinal_gains + c.heading_gains), "control.longitudinal_gains",
              "gains must be >= 0")
        check(c.integral_clamp > 0, "control.integral_clamp", "must be > 0")
        check(c.bridge_mode in BRIDGE_MODES, "control.bridge_mode", f"must be one of {BRIDGE_MODES}")
        check(c.oscillation_amplitude >= 0, "control.oscillation_amplitude", "must be >= 0")
        check(c.oscillation_f1 > 0 and c.oscillation_f2 > 0, "control.oscillation_f1", "frequencies must be > 0")
        check(c.loop_radius > 0, "control.loop_radius", "must be > 0")
        check(c.line_length > 0, "control.line_length", "must be > 0")
        check(c.rate > 0 and v.physics_rate % c.rate == 0, "control.rate", "must divide vehicle.physics_rate")
        check(v.physics_rate % lc.frame_rate == 0, "lidar.frame_rate", "must divide vehicle.physics_rate")
        check(v.physics_rate % self.imu.rate == 0, "imu.rate", "must divide vehicle.physics_rate")

        e = self.estimator
        check(e.voxel_size > 0, "estimator.voxel_size", "must be > 0")
        check(e.max_iterations >= 1, "estimator.max_iterations", "must be >= 1")
        check(e.lidar_sigma > 0, "estimator.lidar_sigma", "must be > 0")

        m = self.metrics
        check(m.voxel_resolution > 0, "metrics.voxel_resolution", "must be > 0")
        check(m.entropy_bins >= 1, "metrics.entropy_bins", "must be >= 1")

        if errors:
            raise ConfigError(errors)

    def to_dict(self) -> Dict[str, Any]:
        """Plain-data view of the simulation parameters (paths excluded)."""
        data = asdict(self)
        for key in ("base_dir", "output_dir", "log_dir", "log_level", "log_format", "workers"):
            data.pop(key, None)
        return data

    def config_hash(self) -> str:
        """SHA-256 of the canonical configuration, excluding the seed."""
        data = self.to_dict()
        data.pop("seed", None)
        canonical = json.dumps(data, sort_keys=True, default=str)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


SECTIONS = ("experiment", "vehicle", "lidar", "imu", "control", "estimator", "metrics")


def _coerce(raw: str, default: Any, key: str) -> Any:
    """Convert a raw string to the type of the field's default value."""
    text = raw.strip()
    if isinstance(default, bool):
        lowered = text.lower()
        if lowered in {"true", "1", "yes", "on"}:
            return True
        if lowered in {"false", "0", "no", "off"}:
            return False
        raise ValueError(f"{key}: expected a boolean, got '{raw}'")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        parts = [p for p in text.replace("(", "").replace(")", "").split(",") if p.strip()]
        values = tuple(float(p) for p in parts)
        if len(values) != len(default):
            raise ValueError(f"{key}: expected {len(default)} comma-separated numbers, got '{raw}'")
        return values
    if isinstance(default, Path):
        return Path(text)
    return text


def apply_overrides(config: ExperimentConfig, values: Dict[str, Optional[str]]) -> ExperimentConfig:
    """
    Apply dotted ``section.key`` string values onto a config.

    Args:
        config: Configuration to update in place
        values: Mapping of dotted keys to raw string values

    Returns:
        The updated configuration

    Raises:
        ConfigError: listing every unknown key or unparsable value
    """
    errors: List[str] = []
    for dotted, raw in values.items():
        if raw is None:
            errors.append(f"{dotted}: missing value")
            continue
        section, _, name = dotted.partition(".")
        if section not in SECTIONS or not name:
            errors.append(f"{dotted}: unknown key")
            continue
        target = config if section == "experiment" else getattr(config, section)
        names = {f.name for f in fields(target)}
        if name not in names or is_dataclass(getattr(target, name)):
            errors.append(f"{dotted}: unknown key")
            continue
        try:
            setattr(target, name, _coerce(raw, getattr(target, name), dotted))
        except ValueError as e:
            errors.append(f"{dotted}: {e}")
    if errors:
        raise ConfigError(errors)
    return config


def load_config(config_path: Optional[Path] = None,
                env_path: Optional[Path] = None,
                overrides: Optional[Dict[str, str]] = None) -> ExperimentConfig:
    """
    Load configuration from an experiment file and environment variables.

    Args:
        config_path: Optional experiment file with ``section.key = value`` lines
        env_path: Optional path to .env file. If None, looks for .env in base directory.
        overrides: Optional dotted-key overrides applied last (from the CLI)

    Returns:
        Validated ExperimentConfig
    """
    from dotenv import dotenv_values, load_dotenv

    config = ExperimentConfig()

    if config_path is not None:
        config_path = Path(config_path)
        if not config_path.exists():
            raise ConfigError([f"config file not found: {config_path}"])
        apply_overrides(config, dict(dotenv_values(config_path)))

    # Load environment variables from .env file
    if env_path is None:
        env_path = config.base_dir / ".env"
    if Path(env_path).exists():
        load_dotenv(dotenv_path=env_path)

    if os.getenv('SPHERE_SIM_OUTPUT_DIR'):
        config.output_dir = Path(os.getenv('SPHERE_SIM_OUTPUT_DIR'))
    if os.getenv('SPHERE_SIM_LOG_DIR'):
        config.log_dir = Path(os.getenv('SPHERE_SIM_LOG_DIR'))
    if os.getenv('SPHERE_SIM_LOG_LEVEL'):
        config.log_level = os.getenv('SPHERE_SIM_LOG_LEVEL', 'INFO')

    if overrides:
        apply_overrides(config, overrides)

    config.validate()
    return config
