"""
Simulated LiDAR: non-repetitive scan pattern and ray-cast returns.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..environment import Scene
from ..geometry import Frame, RigidTransform, compose, rot_y, rot_z

# plastic number, generator of the R2 low-discrepancy sequence
_PLASTIC = 1.32471795724474602596
_R2_STEPS = (1.0 / _PLASTIC, 1.0 / _PLASTIC ** 2)


@dataclass(frozen=True)
class LidarParams:
    """Scan pattern, range noise and mount of the LiDAR (field of view from the sensor datasheet)."""
    rays_per_frame: int = 2000
    frame_rate: float = 10.0
    elevation_min: float = math.radians(-7.0)
    elevation_max: float = math.radians(52.0)
    max_range: float = 40.0
    range_noise: float = 0.02
    mount: RigidTransform = field(default_factory=lambda: RigidTransform(
        np.eye(3), np.array([0.0, 0.0, 0.125]), Frame.SHELL, Frame.LIDAR))

    def __post_init__(self):
        if self.rays_per_frame <= 0:
            raise ValueError("rays_per_frame must be > 0")
        if not -math.pi / 2 < self.elevation_min < self.elevation_max < math.pi / 2:
            raise ValueError("elevation range must lie within (-pi/2, pi/2)")
        if self.range_noise < 0:
            raise ValueError("range_noise must be >= 0")

    @classmethod
    def from_config(cls, lidar_config) -> "LidarParams":
        lc = lidar_config
        return cls(
            rays_per_frame=lc.rays_per_frame,
            frame_rate=lc.frame_rate,
            elevation_min=math.radians(lc.elevation_min_deg),
            elevation_max=math.radians(lc.elevation_max_deg),
            max_range=lc.max_range,
            range_noise=lc.range_noise,
            mount=RigidTransform(np.eye(3), np.asarray(lc.mount_offset, dtype=float), Frame.SHELL, Frame.LIDAR),
        )


@dataclass(frozen=True)
class ScanFrame:
    """One LiDAR frame: returns in frame L plus the true poses used to take it."""
    timestamp: float
    points: np.ndarray
    true_pose: RigidTransform
    mount: RigidTransform
    frame_index: int = 0

    def __len__(self) -> int:
        return len(self.points)

    def world_points(self, pose: Optional[RigidTransform] = None) -> np.ndarray:
        """Returns mapped to the world with ``pose`` (T_WL), the true pose by default."""
        return (pose or self.true_pose).apply(self.points)


def tilted_mount(offset, pitch: float = 0.0, yaw: float = 0.0) -> RigidTransform:
    """Mount T_OL turned by ``yaw`` about the vertical and pitched nose-down by ``pitch``."""
    return RigidTransform(rot_z(yaw) @ rot_y(pitch), np.asarray(offset, dtype=float), Frame.SHELL, Frame.LIDAR)


def lidar_pose(T_WO: RigidTransform, T_OL: RigidTransform) -> RigidTransform:
    """World pose of the LiDAR, ``T_WL = T_WO T_OL``."""
    return compose(T_WO, T_OL)


def scan_pattern(frame_index: int, params: LidarParams) -> np.ndarray:
    """
    Unit ray directions in frame L for one frame.

    The pattern continues an R2 low-discrepancy sequence across frames, so it
    never repeats but is a pure function of the frame index.
    """
    n = frame_index * params.rays_per_frame + np.arange(1, params.rays_per_frame + 1, dtype=np.float64)
    u = np.mod(0.5 + n * _R2_STEPS[0], 1.0)
    v = np.mod(0.5 + n * _R2_STEPS[1], 1.0)
    azimuth = 2.0 * np.pi * u
    elevation = params.elevation_min + (params.elevation_max - params.elevation_min) * v
    cos_el = np.cos(elevation)
    return np.column_stack([cos_el * np.cos(azimuth), cos_el * np.sin(azimuth), np.sin(elevation)])


def frame_rng(seed: int, frame_index: int) -> np.random.Generator:
    """Independent random stream per (seed, frame)."""
    return np.random.default_rng([int(seed), int(frame_index)])


def simulate_scan(T_WL: RigidTransform, scene: Scene, params: LidarParams,
                  rng: Optional[np.random.Generator] = None, frame_index: int = 0,
                  timestamp: float = 0.0, mount: Optional[RigidTransform] = None) -> ScanFrame:
    """
    Cast the frame's rays into the scene from the LiDAR pose.

    Args:
        T_WL: True LiDAR pose in the world
        scene: Scene to scan
        params: LiDAR parameters
        rng: Random generator for range noise (required when range_noise > 0)
        frame_index: Index selecting the scan pattern
        timestamp: Frame time in seconds
        mount: Mount transform recorded in the frame (``params.mount`` by default)

    Returns:
        ScanFrame with returns in frame L; rays that hit nothing are dropped
    """
    directions_l = scan_pattern(frame_index, params)
    directions_w = T_WL.rotate(directions_l)
    ranges, index = scene.cast(T_WL.translation, directions_w, params.max_range)
    hit = index >= 0
    ranges = ranges[hit]
    directions_l = directions_l[hit]
    if params.range_noise > 0 and len(ranges):
        if rng is None:
            raise ValueError("a random generator is required when range_noise > 0")
        ranges = ranges + rng.normal(0.0, params.range_noise, size=len(ranges))
        keep = (ranges > 0.0) & (ranges <= params.max_range)
        ranges, directions_l = ranges[keep], directions_l[keep]
    points = directions_l * ranges[:, None]
    return ScanFrame(timestamp, points, T_WL, mount or params.mount, frame_index)
