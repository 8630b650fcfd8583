"""
Utility and helper functions for the spherical robot simulator
"""

from .file_utils import (
    ESTIMATE_COLUMNS,
    IMU_COLUMNS,
    TRAJECTORY_COLUMNS,
    create_directory,
    estimate_frame,
    imu_frame,
    read_ply,
    save_to_csv,
    save_to_excel,
    write_ply,
)
from .logging_utils import setup_logger

__all__ = [
    'ESTIMATE_COLUMNS', 'IMU_COLUMNS', 'TRAJECTORY_COLUMNS', 'create_directory', 'estimate_frame',
    'imu_frame', 'read_ply', 'save_to_csv', 'save_to_excel', 'write_ply', 'setup_logger',
]
