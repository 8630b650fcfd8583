"""
Closed-loop experiment runner: simulation, metrics and per-repeat artifacts.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from ..config import ExperimentConfig
from ..control import OscillationParams, PidGains, PlanarEstimate, ReferenceTrajectory, TrajectoryTracker
from ..dynamics import SimState, VehicleParams, WheelCommand, initial_state, step
from ..environment import Scene, build_scene, load_scene, reference_voxels, voxelize
from ..estimator import LioEstimator, LocalMap, RobotState, find_correspondences, information_eigenvalues, preintegrate
from ..exceptions import RunError
from ..geometry import RigidTransform
from ..metrics import (
    RunReport,
    completeness,
    elevation_angles,
    histogram_entropy,
    lap_errors,
    near_ground_fraction,
    target_recall,
)
from ..sensors import (
    ImuBiases,
    ImuSample,
    LidarParams,
    ScanFrame,
    frame_rng,
    imu_over_interval,
    lidar_pose,
    simulate_scan,
    tilted_mount,
)
from ..utils import (
    TRAJECTORY_COLUMNS,
    create_directory,
    estimate_frame,
    imu_frame,
    save_to_csv,
    write_ply,
)

logger = logging.getLogger(__name__)


@dataclass
class RunRecord:
    """Everything recorded while simulating one repeat."""
    control_rows: List[List[float]] = field(default_factory=list)
    map_points: List[np.ndarray] = field(default_factory=list)
    sensor_positions: List[np.ndarray] = field(default_factory=list)
    elevations: List[np.ndarray] = field(default_factory=list)
    min_eigenvalues: List[float] = field(default_factory=list)
    imu_samples: List[ImuSample] = field(default_factory=list)
    estimates: List[Tuple[float, np.ndarray, np.ndarray]] = field(default_factory=list)
    degenerate_frames: int = 0
    degraded_frames: int = 0
    physics_ticks: int = 0
    control_ticks: int = 0
    frames: int = 0
    saturated_ticks: int = 0
    final_state: Optional[SimState] = None

    def trajectory_table(self) -> pd.DataFrame:
        return pd.DataFrame(self.control_rows, columns=TRAJECTORY_COLUMNS)

    def cloud(self) -> np.ndarray:
        return np.vstack(self.map_points) if self.map_points else np.zeros((0, 3))


def make_scene(config: ExperimentConfig) -> Scene:
    if config.scene_file:
        return load_scene(config.scene_file, kind=config.scene)
    return build_scene(config.scene)


def mount_at(config: ExperimentConfig, t: float) -> RigidTransform:
    """LiDAR mount T_OL of the configured baseline at time ``t``."""
    lc = config.lidar
    if config.mode == "static_tilt":
        return tilted_mount(lc.mount_offset, math.radians(lc.static_tilt_deg))
    if config.mode == "active_rotation":
        yaw = 2.0 * math.pi * lc.active_rotation_rate * t
        return tilted_mount(lc.mount_offset, math.radians(lc.active_tilt_deg), yaw)
    return tilted_mount(lc.mount_offset)


def _ticks_every(physics_rate: float, rate: float) -> int:
    return int(round(physics_rate / rate))


class ExperimentProcessor:
    """Runs the closed loop for every repeat of one configuration."""

    def __init__(self, config: ExperimentConfig):
        """
        Initialize the ExperimentProcessor.

        Args:
            config: Validated experiment configuration
        """
        self.config = config
        self.logger = logging.getLogger(__name__)

    def simulate(self, seed: int, scene: Optional[Scene] = None) -> RunRecord:
        """
        Simulate one run: 1 kHz physics, 100 Hz control, 10 Hz LiDAR, 200 Hz IMU by default.

        Args:
            seed: Seed of every random stream of the run
            scene: Scene to run in (built from the config when None)

        Returns:
            RunRecord with the logged series
        """
        config = self.config
        cc, ic, ec = config.control, config.imu, config.estimator
        scene = scene or make_scene(config)
        passive = config.mode == "passive_excitation"
        estimator_in_loop = config.control_mode == "estimator_in_loop"

        params = VehicleParams.from_config(config.vehicle, freeze_attitude=not passive)
        lidar_params = LidarParams.from_config(config.lidar)
        trajectory = ReferenceTrajectory(config.trajectory, config.speed, scene.anchor(config.trajectory),
                                         cc.loop_radius, cc.line_length)
        start = trajectory(0.0)
        state = initial_state((start.position[0], start.position[1], params.shell.shell_radius),
                              start.heading, params, scene)
        tracker = TrajectoryTracker(
            trajectory, PidGains.from_config(cc), params.drive,
            OscillationParams.from_config(cc, enabled=cc.oscillation_enabled and passive),
            params.max_wheel_speed, cc.bridge_mode, 1.0 / cc.rate,
        )
        biases = ImuBiases(ic.accel_bias, ic.gyro_bias)
        imu_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))

        rate = config.vehicle.physics_rate
        dt = 1.0 / rate
        n_steps = int(round(config.duration * rate))
        control_every = _ticks_every(rate, cc.rate)
        lidar_every = _ticks_every(rate, config.lidar.frame_rate)
        imu_every = _ticks_every(rate, ic.rate)

        record = RunRecord()
        estimator: Optional[LioEstimator] = None
        registration_map = LocalMap(ec.voxel_size, ec.min_plane_points, ec.planarity_ratio)
        imu_buffer: List[ImuSample] = []
        last_frame_t = 0.0
        imu_start = state
        cmd = WheelCommand(0.0, 0.0)

        self.logger.info(f"Simulating {config.duration:.1f} s: scene={scene.kind} trajectory={config.trajectory} "
                         f"mode={config.mode} control={config.control_mode} seed={seed}")

        for k in range(n_steps):
            t = k * dt

            if k % lidar_every == 0:
                frame_index = k // lidar_every
                mount = mount_at(config, t)
                scan = simulate_scan(lidar_pose(state.T_WO, mount), scene, lidar_params,
                                     frame_rng(seed, frame_index), frame_index, t, mount)
                record.frames += 1
                record.sensor_positions.append(scan.true_pose.translation)
                record.elevations.append(elevation_angles([scan]))

                if estimator_in_loop:
                    if estimator is None:
                        estimator = LioEstimator(ec, RobotState(p=state.position, v=state.v_O_world,
                                                                R=state.T_WO.rotation, b_a=biases.accel,
                                                                b_g=biases.gyro, t=t))
                        estimator.initialize(scan)
                    else:
                        preint = preintegrate(imu_buffer, estimator.state.biases, ec.gyro_noise,
                                              ec.accel_noise, t_end=t)
                        result = estimator.process(preint, scan)
                        record.min_eigenvalues.append(result.min_eigenvalue)
                        record.degenerate_frames += int(result.degenerate)
                        record.degraded_frames += int(result.degraded)
                    est = estimator.state
                    record.estimates.append((t, est.p.copy(), est.R.copy()))
                    record.map_points.append(
                        lidar_pose(est.pose, mount).apply(scan.points))
                    tracker.receive(PlanarEstimate.from_pose(t, est.R, est.p))
                else:
                    self._registration_information(scan, state, registration_map, record)
                    record.map_points.append(scan.world_points())
                imu_buffer = []
                last_frame_t = t

            if k % control_every == 0:
                if not estimator_in_loop:
                    tracker.receive(PlanarEstimate(t, state.position[:2], state.heading))
                cmd, reference = tracker.tick(t)
                bridged = tracker.bridge.query(t)
                est_xy = bridged.position if bridged is not None else np.array([np.nan, np.nan])
                true_xy = state.position[:2]
                error = float(np.linalg.norm(true_xy - reference.position))
                record.control_rows.append([t, reference.position[0], reference.position[1],
                                            true_xy[0], true_xy[1], est_xy[0], est_xy[1], error])
                record.control_ticks += 1

            if k % imu_every == 0:
                imu_start = state
            state = step(state, cmd, dt, params, scene)
            if (k + 1) % imu_every == 0:
                # emitted once its interval has been simulated, before the next frame needs it
                sample = imu_over_interval(imu_start, state, biases, ic.gyro_noise, ic.accel_noise, imu_rng)
                record.imu_samples.append(sample)
                imu_buffer.append(sample)
            record.physics_ticks += 1

        record.saturated_ticks = tracker.saturated_ticks
        record.final_state = state
        self.logger.debug(f"Last frame at t={last_frame_t:.2f} s; {record.physics_ticks} physics ticks")
        return record

    def _registration_information(self, scan: ScanFrame, state: SimState, registration_map: LocalMap,
                                  record: RunRecord) -> None:
        """Smallest eigenvalue of the scan's registration normal matrix at the true pose."""
        ec = self.config.estimator
        if not registration_map.is_empty():
            corr = find_correspondences(scan, registration_map, state.T_WO, ec.max_points)
            if len(corr) >= ec.min_correspondences:
                eigenvalue = float(information_eigenvalues(corr.jacobian(state.T_WO))[0])
            else:
                eigenvalue = 0.0
            record.min_eigenvalues.append(eigenvalue)
            record.degenerate_frames += int(eigenvalue < ec.degeneracy_threshold)
        registration_map.insert(scan.world_points())

    def evaluate(self, record: RunRecord, scene: Scene, repeat: int, seed: int) -> RunReport:
        """Compute the run's metrics."""
        config = self.config
        mc = config.metrics
        cloud = record.cloud()
        estimated = voxelize(cloud, mc.voxel_resolution)
        table = record.trajectory_table()
        targets = scene.target_surfaces()
        recall = float("nan")
        if targets:
            recall = target_recall(reference_voxels(scene, mc.voxel_resolution, targets), estimated)
        trajectory = ReferenceTrajectory(config.trajectory, config.speed, scene.anchor(config.trajectory),
                                         config.control.loop_radius, config.control.line_length)
        eigenvalues = np.asarray(record.min_eigenvalues, dtype=float)
        elevations = np.concatenate(record.elevations) if record.elevations else np.zeros(0)
        return RunReport(
            scene=scene.kind,
            trajectory=config.trajectory,
            mode=config.mode,
            control_mode=config.control_mode,
            repeat=repeat,
            seed=seed,
            config_hash=config.config_hash(),
            completeness=completeness(reference_voxels(scene, mc.voxel_resolution), estimated),
            mean_tracking_error=float(table["err_m"].mean()),
            near_ground_fraction=near_ground_fraction(cloud, np.array(record.sensor_positions),
                                                      mc.near_ground_height, mc.near_ground_radius),
            elevation_entropy=histogram_entropy(elevations, mc.entropy_bins),
            target_recall=recall,
            min_eigenvalue=float(np.median(eigenvalues)) if len(eigenvalues) else float("nan"),
            degenerate_frames=record.degenerate_frames,
            degraded_frames=record.degraded_frames,
            frames=record.frames,
            saturated_ticks=record.saturated_ticks,
            lap_errors=lap_errors(table["t"].to_numpy(), table["err_m"].to_numpy(), trajectory.lap_time),
            map_source="estimated poses" if config.control_mode == "estimator_in_loop" else "true poses",
        )

    def write_artifacts(self, record: RunRecord, report: RunReport, run_dir: Path) -> Path:
        """Write trajectory.csv, map.ply, report.csv, summary.txt, imu.csv (and estimate.csv)."""
        run_dir = create_directory(run_dir)
        save_to_csv(record.trajectory_table(), run_dir / "trajectory.csv")
        # voxel-center cloud keeps the PLY size independent of run length
        write_ply(voxelize(record.cloud(), self.config.metrics.voxel_resolution).centers(), run_dir / "map.ply")
        save_to_csv(pd.DataFrame([report.to_row()]), run_dir / "report.csv")
        save_to_csv(imu_frame(record.imu_samples), run_dir / "imu.csv")
        if record.estimates:
            times, positions, rotations = zip(*record.estimates)
            save_to_csv(estimate_frame(times, np.array(positions), np.array(rotations)), run_dir / "estimate.csv")
        with open(run_dir / "summary.txt", "w", encoding="utf-8", newline="\n") as f:
            f.write(report.summary())
        self.logger.info(f"Artifacts written to {run_dir}")
        return run_dir

    def run_repeat(self, repeat: int, write: bool = True) -> RunReport:
        """
        Simulate, evaluate and (optionally) write one repeat.

        Raises:
            RunError: wrapping any failure with the run context
        """
        seed = self.config.seed + repeat
        context = {"scene": self.config.scene, "mode": self.config.mode, "repeat": repeat, "seed": seed}
        try:
            scene = make_scene(self.config)
            record = self.simulate(seed, scene)
            report = self.evaluate(record, scene, repeat, seed)
            if write:
                self.write_artifacts(record, report, self.config.run_dir(repeat))
            self.logger.info(f"Repeat {repeat}: C={report.completeness:.3f} "
                             f"err={report.mean_tracking_error:.3f} m "
                             f"near-ground={report.near_ground_fraction:.3f} "
                             f"entropy={report.elevation_entropy:.3f} bits")
            return report
        except Exception as e:
            error_msg = f"Run failed ({', '.join(f'{k}={v}' for k, v in context.items())}): {str(e)}"
            self.logger.exception(error_msg)
            raise RunError(error_msg, context) from e

    def run(self, write: bool = True) -> List[RunReport]:
        """Run every repeat, in worker processes when ``config.workers > 1``."""
        repeats = range(self.config.repeats)
        if self.config.workers > 1 and self.config.repeats > 1:
            with ProcessPoolExecutor(max_workers=self.config.workers) as pool:
                return list(pool.map(_run_repeat, [self.config] * len(repeats), repeats, [write] * len(repeats)))
        return [self.run_repeat(r, write) for r in repeats]


def _run_repeat(config: ExperimentConfig, repeat: int, write: bool) -> RunReport:
    return ExperimentProcessor(config).run_repeat(repeat, write)


def run_experiment(config: ExperimentConfig, write: bool = True) -> List[RunReport]:
    """
    Run all repeats of one configuration.

    Args:
        config: Experiment configuration (validated here)
        write: Write per-repeat artifacts under ``config.output_dir``

    Returns:
        One RunReport per repeat, seeded ``seed + repeat``
    """
    config.validate()
    return ExperimentProcessor(config).run(write)
