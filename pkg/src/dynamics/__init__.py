"""
Vehicle dynamics of the pendulum-driven spherical robot
"""

from .vehicle import (
    DriveParams,
    FlatTerrain,
    ShellParams,
    SimState,
    VehicleParams,
    WheelCommand,
    com_offset,
    drive_pose,
    gravity_torque,
    initial_state,
    pendulum_energy,
    rolling_omega,
    rolling_residual,
    shell_velocity,
    steady_state_pitch,
    step,
    wheel_to_body_twist,
)

__all__ = [
    'DriveParams', 'FlatTerrain', 'ShellParams', 'SimState', 'VehicleParams', 'WheelCommand',
    'com_offset', 'drive_pose', 'gravity_torque', 'initial_state', 'pendulum_energy',
    'rolling_omega', 'rolling_residual', 'shell_velocity', 'steady_state_pitch', 'step',
    'wheel_to_body_twist',
]
