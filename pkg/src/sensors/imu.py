"""
Simulated IMU measurements from the true shell state.
"""
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..dynamics import SimState
from ..geometry import log_so3

GRAVITY_WORLD = np.array([0.0, 0.0, -9.81])


@dataclass(frozen=True)
class ImuSample:
    timestamp: float
    gyro: np.ndarray
    accel: np.ndarray


@dataclass(frozen=True)
class ImuBiases:
    accel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gyro: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "accel", np.asarray(self.accel, dtype=float).reshape(3))
        object.__setattr__(self, "gyro", np.asarray(self.gyro, dtype=float).reshape(3))


def simulate_imu(state: SimState, accel_world, biases: Optional[ImuBiases] = None,
                 sigma_g: float = 0.0, sigma_a: float = 0.0,
                 rng: Optional[np.random.Generator] = None,
                 gravity=GRAVITY_WORLD) -> ImuSample:
    """
    Gyro and accelerometer readings of an IMU at the shell center, in frame O.

    Args:
        state: True simulator state
        accel_world: True linear acceleration of the shell center (world)
        biases: Sensor biases
        sigma_g: Gyro white-noise standard deviation (rad/s)
        sigma_a: Accelerometer white-noise standard deviation (m/s^2)
        rng: Random generator, required when any sigma is positive

    Returns:
        ImuSample stamped with the state time
    """
    biases = biases or ImuBiases()
    rotation = state.T_WO.rotation
    gyro = np.asarray(state.omega_O, dtype=float) + biases.gyro
    accel = rotation.T @ (np.asarray(accel_world, dtype=float) - np.asarray(gravity, dtype=float)) + biases.accel
    if sigma_g > 0 or sigma_a > 0:
        if rng is None:
            raise ValueError("a random generator is required for noisy IMU samples")
        gyro = gyro + rng.normal(0.0, sigma_g, 3)
        accel = accel + rng.normal(0.0, sigma_a, 3)
    return ImuSample(state.t, gyro, accel)


def imu_over_interval(start: SimState, end: SimState, biases: Optional[ImuBiases] = None,
                      sigma_g: float = 0.0, sigma_a: float = 0.0,
                      rng: Optional[np.random.Generator] = None,
                      gravity=GRAVITY_WORLD) -> ImuSample:
    """
    Sample stamped at ``start.t`` holding the mean rate and acceleration until ``end.t``.

    Held over its interval, the sample reproduces the true rotation and
    velocity change exactly, so zero-order-hold preintegration of these
    samples matches the simulated motion.
    """
    duration = end.t - start.t
    if duration <= 0:
        raise ValueError(f"IMU interval must be positive, got {duration}")
    omega = log_so3(start.T_WO.rotation.T @ end.T_WO.rotation) / duration
    accel_world = (np.asarray(end.v_O_world, dtype=float) - np.asarray(start.v_O_world, dtype=float)) / duration
    return simulate_imu(replace(start, omega_O=omega), accel_world, biases, sigma_g, sigma_a, rng, gravity)
