"""
Reference trajectories and the tracking controller
"""

from .controller import (
    CONTROL_DT,
    ChannelGains,
    EstimateBridge,
    OscillationParams,
    PidGains,
    PidMemory,
    PlanarEstimate,
    TrackingError,
    TrajectoryTracker,
    bridge_estimate,
    pid_step,
    shape_oscillation,
    tracking_error,
    twist_to_wheels,
)
from .trajectory import ReferenceState, ReferenceTrajectory, ellipse_perimeter, lap_length, reference_state, wrap_angle

__all__ = [
    'CONTROL_DT', 'ChannelGains', 'EstimateBridge', 'OscillationParams', 'PidGains', 'PidMemory',
    'PlanarEstimate', 'TrackingError', 'TrajectoryTracker', 'bridge_estimate', 'pid_step',
    'shape_oscillation', 'tracking_error', 'twist_to_wheels',
    'ReferenceState', 'ReferenceTrajectory', 'ellipse_perimeter', 'lap_length', 'reference_state', 'wrap_angle',
]
