"""
LiDAR-inertial odometry: preintegration, local map and joint update
"""

from .lio import (
    LidarCorrespondences,
    LidarResidual,
    LioEstimator,
    LioParams,
    LioResult,
    RobotState,
    find_correspondences,
    information_eigenvalues,
    lio_update,
    predict_state,
    residual_imu,
    residual_lidar,
)
from .local_map import LocalMap, PlaneFit, fit_plane, map_insert, pack_keys
from .preintegration import Preintegrated, preintegrate

__all__ = [
    'LidarCorrespondences', 'LidarResidual', 'LioEstimator', 'LioParams', 'LioResult', 'RobotState',
    'find_correspondences', 'information_eigenvalues', 'lio_update', 'predict_state', 'residual_imu',
    'residual_lidar', 'LocalMap', 'PlaneFit', 'fit_plane', 'map_insert', 'pack_keys',
    'Preintegrated', 'preintegrate',
]
