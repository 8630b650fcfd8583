"""
Simulated LiDAR and IMU sensors
"""

from .imu import GRAVITY_WORLD, ImuBiases, ImuSample, imu_over_interval, simulate_imu
from .lidar import LidarParams, ScanFrame, frame_rng, lidar_pose, scan_pattern, simulate_scan, tilted_mount

__all__ = [
    'GRAVITY_WORLD', 'ImuBiases', 'ImuSample', 'imu_over_interval', 'simulate_imu',
    'LidarParams', 'ScanFrame', 'frame_rng', 'lidar_pose', 'scan_pattern', 'simulate_scan', 'tilted_mount',
]
