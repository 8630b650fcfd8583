"""
Configuration module for the spherical robot simulator
"""

from .config import (
    BASELINE_MODES,
    BRIDGE_MODES,
    CONTROL_MODES,
    GOLDEN_RATIO,
    SCENE_KINDS,
    TRAJECTORY_KINDS,
    ControlConfig,
    EstimatorConfig,
    ExperimentConfig,
    ImuConfig,
    LidarConfig,
    MetricsConfig,
    VehicleConfig,
    apply_overrides,
    load_config,
)

__all__ = [
    'BASELINE_MODES', 'BRIDGE_MODES', 'CONTROL_MODES', 'GOLDEN_RATIO', 'SCENE_KINDS', 'TRAJECTORY_KINDS',
    'ControlConfig', 'EstimatorConfig', 'ExperimentConfig', 'ImuConfig', 'LidarConfig',
    'MetricsConfig', 'VehicleConfig', 'apply_overrides', 'load_config',
]
