"""
On-manifold IMU preintegration with first-order bias correction.

Increments are expressed in the body frame of the first sample and exclude
gravity, which is applied when the increments are combined with a state.
Covariance ordering is (rotation, velocity, position).
"""
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from ..exceptions import EmptyBufferError, NonMonotonicTimestampError
from ..geometry import exp_so3, hat, right_jacobian
from ..sensors import ImuBiases, ImuSample

_COVARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class Preintegrated:
    """Preintegrated increments between two frames and their bias Jacobians."""
    delta_R: np.ndarray
    delta_v: np.ndarray
    delta_p: np.ndarray
    duration: float
    covariance: np.ndarray
    bias: ImuBiases
    d_R_d_bg: np.ndarray
    d_v_d_ba: np.ndarray
    d_v_d_bg: np.ndarray
    d_p_d_ba: np.ndarray
    d_p_d_bg: np.ndarray

    def corrected(self, bias: ImuBiases) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Increments re-linearised to ``bias`` (first order)."""
        dba = bias.accel - self.bias.accel
        dbg = bias.gyro - self.bias.gyro
        delta_R = self.delta_R @ exp_so3(self.d_R_d_bg @ dbg)
        delta_v = self.delta_v + self.d_v_d_ba @ dba + self.d_v_d_bg @ dbg
        delta_p = self.delta_p + self.d_p_d_ba @ dba + self.d_p_d_bg @ dbg
        return delta_R, delta_v, delta_p


def _intervals(samples: Sequence[ImuSample], t_end: Optional[float]) -> np.ndarray:
    stamps = np.array([s.timestamp for s in samples], dtype=float)
    if np.any(np.diff(stamps) <= 0):
        raise NonMonotonicTimestampError("IMU timestamps must be strictly increasing")
    if t_end is not None:
        if t_end <= stamps[-1]:
            raise NonMonotonicTimestampError(f"t_end={t_end} is not after the last sample at {stamps[-1]}")
        last = t_end - stamps[-1]
    elif len(stamps) > 1:
        last = stamps[-1] - stamps[-2]
    else:
        raise EmptyBufferError("a single IMU sample needs t_end to define its interval")
    return np.append(np.diff(stamps), last)


def preintegrate(samples: Sequence[ImuSample], bias: Optional[ImuBiases] = None,
                 gyro_noise: float = 0.01, accel_noise: float = 0.05,
                 t_end: Optional[float] = None) -> Preintegrated:
    """
    Preintegrate bias-corrected IMU samples.

    Each sample is held until the next one; the last sample is held until
    ``t_end`` or, without it, for the previous sample interval.

    Args:
        samples: IMU samples, strictly increasing timestamps
        bias: Bias estimate used as the linearisation point
        gyro_noise: Per-sample gyro standard deviation (rad/s)
        accel_noise: Per-sample accelerometer standard deviation (m/s^2)
        t_end: End of the integration window

    Returns:
        Preintegrated increments with covariance and bias Jacobians

    Raises:
        EmptyBufferError: if no samples are given
        NonMonotonicTimestampError: if timestamps repeat or go backwards
    """
    if not samples:
        raise EmptyBufferError("no IMU samples to preintegrate")
    bias = bias or ImuBiases()
    intervals = _intervals(samples, t_end)
    noise = np.diag([gyro_noise ** 2] * 3 + [accel_noise ** 2] * 3)

    delta_R = np.eye(3)
    delta_v = np.zeros(3)
    delta_p = np.zeros(3)
    covariance = _COVARIANCE_FLOOR * np.eye(9)
    d_R_d_bg = np.zeros((3, 3))
    d_v_d_ba = np.zeros((3, 3))
    d_v_d_bg = np.zeros((3, 3))
    d_p_d_ba = np.zeros((3, 3))
    d_p_d_bg = np.zeros((3, 3))

    for sample, dt in zip(samples, intervals):
        omega = (sample.gyro - bias.gyro) * dt
        acc = sample.accel - bias.accel
        step_R = exp_so3(omega)
        jr = right_jacobian(omega)
        acc_hat = hat(acc)

        a = np.zeros((9, 9))
        a[0:3, 0:3] = step_R.T
        a[3:6, 0:3] = -delta_R @ acc_hat * dt
        a[3:6, 3:6] = np.eye(3)
        a[6:9, 0:3] = -0.5 * delta_R @ acc_hat * dt ** 2
        a[6:9, 3:6] = np.eye(3) * dt
        a[6:9, 6:9] = np.eye(3)
        b = np.zeros((9, 6))
        b[0:3, 0:3] = jr * dt
        b[3:6, 3:6] = delta_R * dt
        b[6:9, 3:6] = 0.5 * delta_R * dt ** 2
        covariance = a @ covariance @ a.T + b @ noise @ b.T

        # bias Jacobians use the increments before this sample
        d_p_d_ba = d_p_d_ba + d_v_d_ba * dt - 0.5 * delta_R * dt ** 2
        d_p_d_bg = d_p_d_bg + d_v_d_bg * dt - 0.5 * delta_R @ acc_hat @ d_R_d_bg * dt ** 2
        d_v_d_ba = d_v_d_ba - delta_R * dt
        d_v_d_bg = d_v_d_bg - delta_R @ acc_hat @ d_R_d_bg * dt
        d_R_d_bg = step_R.T @ d_R_d_bg - jr * dt

        delta_p = delta_p + delta_v * dt + 0.5 * delta_R @ acc * dt ** 2
        delta_v = delta_v + delta_R @ acc * dt
        delta_R = delta_R @ step_R

    covariance = 0.5 * (covariance + covariance.T)
    return Preintegrated(delta_R, delta_v, delta_p, float(np.sum(intervals)), covariance, bias,
                         d_R_d_bg, d_v_d_ba, d_v_d_bg, d_p_d_ba, d_p_d_bg)
