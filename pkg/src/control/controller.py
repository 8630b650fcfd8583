"""
Trajectory tracking: estimate bridging, PID on a Frenet error, inverse
kinematics to wheel speeds and oscillation shaping.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np

from ..config import BRIDGE_MODES
from ..dynamics import DriveParams, WheelCommand
from ..exceptions import UnknownKindError
from .trajectory import ReferenceState, ReferenceTrajectory, wrap_angle

logger = logging.getLogger(__name__)

CONTROL_DT = 0.01


@dataclass(frozen=True)
class PlanarEstimate:
    """Pose estimate as seen by the controller: planar position and heading."""
    t: float
    position: np.ndarray
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(2))

    @classmethod
    def from_pose(cls, t: float, rotation: np.ndarray, translation) -> "PlanarEstimate":
        """Project a 3D pose: heading is the yaw of the body x axis."""
        return cls(t, np.asarray(translation, dtype=float)[:2], math.atan2(rotation[1, 0], rotation[0, 0]))


def bridge_estimate(estimates: List[PlanarEstimate], t: float, mode: str = "hold") -> Optional[PlanarEstimate]:
    """
    Controller-rate state from the latest estimator outputs.

    Args:
        estimates: Estimates received so far, oldest first (only the last two are used)
        t: Control tick time
        mode: ``hold`` returns the latest estimate; ``interpolate`` extrapolates
            at constant velocity from the last two

    Returns:
        The bridged estimate stamped ``t``, or None when nothing was received yet
    """
    if mode not in BRIDGE_MODES:
        raise UnknownKindError("bridge mode", mode, BRIDGE_MODES)
    if not estimates:
        return None
    latest = estimates[-1]
    if mode == "hold" or len(estimates) < 2 or latest.t <= estimates[-2].t:
        return replace(latest, t=t)
    previous = estimates[-2]
    ratio = (t - latest.t) / (latest.t - previous.t)
    position = latest.position + ratio * (latest.position - previous.position)
    heading = wrap_angle(latest.heading + ratio * wrap_angle(latest.heading - previous.heading))
    return PlanarEstimate(t, position, heading)


class EstimateBridge:
    """Last-value mailbox between the estimator and the control loop."""

    def __init__(self, mode: str = "hold"):
        if mode not in BRIDGE_MODES:
            raise UnknownKindError("bridge mode", mode, BRIDGE_MODES)
        self.mode = mode
        self._estimates: List[PlanarEstimate] = []

    def push(self, estimate: PlanarEstimate) -> None:
        self._estimates = (self._estimates + [estimate])[-2:]

    def query(self, t: float) -> Optional[PlanarEstimate]:
        return bridge_estimate(self._estimates, t, self.mode)

    @property
    def has_estimate(self) -> bool:
        return bool(self._estimates)


@dataclass(frozen=True)
class ChannelGains:
    kp: float
    ki: float = 0.0
    kd: float = 0.0

    def __post_init__(self):
        if min(self.kp, self.ki, self.kd) < 0:
            raise ValueError("PID gains must be >= 0")


@dataclass(frozen=True)
class PidGains:
    """Gains of the longitudinal and heading channels with clamp and saturation."""
    longitudinal: ChannelGains = field(default_factory=lambda: ChannelGains(1.2, 0.1, 0.05))
    heading: ChannelGains = field(default_factory=lambda: ChannelGains(2.0, 0.0, 0.1))
    cross_track_gain: float = 2.0
    integral_clamp: float = 0.5
    max_linear_speed: float = 1.25
    max_angular_speed: float = 6.0

    def __post_init__(self):
        if self.integral_clamp <= 0:
            raise ValueError("integral_clamp must be > 0")
        if self.cross_track_gain < 0:
            raise ValueError("cross_track_gain must be >= 0")

    @classmethod
    def from_config(cls, control_config) -> "PidGains":
        cc = control_config
        return cls(ChannelGains(*cc.longitudinal_gains), ChannelGains(*cc.heading_gains),
                   cc.cross_track_gain, cc.integral_clamp, cc.max_linear_speed, cc.max_angular_speed)


@dataclass(frozen=True)
class TrackingError:
    """Reference minus estimate, in the reference's Frenet frame."""
    along_track: float
    cross_track: float
    heading: float


@dataclass(frozen=True)
class PidMemory:
    integral: Tuple[float, float] = (0.0, 0.0)
    previous: Optional[Tuple[float, float]] = None


def tracking_error(reference: ReferenceState, estimate: PlanarEstimate) -> TrackingError:
    diff = reference.position - estimate.position
    c, s = math.cos(reference.heading), math.sin(reference.heading)
    return TrackingError(
        along_track=c * diff[0] + s * diff[1],
        cross_track=-s * diff[0] + c * diff[1],
        heading=wrap_angle(reference.heading - estimate.heading),
    )


def pid_step(error: TrackingError, gains: PidGains, memory: PidMemory, dt: float = CONTROL_DT,
             v_ff: float = 0.0, omega_ff: float = 0.0) -> Tuple[float, float, PidMemory]:
    """
    One tick of the two-channel PID.

    The longitudinal channel acts on the along-track error. The heading channel
    acts on ``heading + atan(k_ct * cross_track)``. The derivative term is zero
    on the first tick, the integral state is clamped to ``+-integral_clamp``
    and both outputs are saturated.

    Returns:
        (v_cmd, omega_cmd, new memory)
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    e = (error.along_track, error.heading + math.atan(gains.cross_track_gain * error.cross_track))
    if not all(math.isfinite(x) for x in e):
        raise ValueError("tracking error must be finite")
    clamp = gains.integral_clamp
    integral = tuple(float(np.clip(i + x * dt, -clamp, clamp)) for i, x in zip(memory.integral, e))
    previous = memory.previous if memory.previous is not None else e
    outputs = []
    for ch, x, i, p in zip((gains.longitudinal, gains.heading), e, integral, previous):
        outputs.append(ch.kp * x + ch.ki * i + ch.kd * (x - p) / dt)
    v_cmd = float(np.clip(v_ff + outputs[0], -gains.max_linear_speed, gains.max_linear_speed))
    omega_cmd = float(np.clip(omega_ff + outputs[1], -gains.max_angular_speed, gains.max_angular_speed))
    return v_cmd, omega_cmd, PidMemory(integral, e)


def twist_to_wheels(v_cmd: float, omega_cmd: float, p: DriveParams, u_max: float = math.inf) -> WheelCommand:
    """Inverse differential-drive kinematics, saturated to ``+-u_max``."""
    half_track = 0.5 * omega_cmd * p.track_width
    cmd = WheelCommand((v_cmd - half_track) / p.wheel_radius, (v_cmd + half_track) / p.wheel_radius)
    return cmd.saturated(u_max)


@dataclass(frozen=True)
class OscillationParams:
    """Bounded quasi-periodic wheel excitation from two incommensurate sines."""
    amplitude: float = 7.0
    f1: float = 1.2
    f2: float = 1.2 * (1.0 + math.sqrt(5.0)) / 2.0
    enabled: bool = True

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        if self.f1 <= 0 or self.f2 <= 0:
            raise ValueError("frequencies must be > 0")
        ratio = self.f1 / self.f2
        if abs(float(Fraction(ratio).limit_denominator(20)) - ratio) < 1e-9:
            raise ValueError(f"frequency ratio {ratio:.6f} is a simple rational; the excitation would repeat")

    @classmethod
    def from_config(cls, control_config, enabled: Optional[bool] = None) -> "OscillationParams":
        cc = control_config
        return cls(cc.oscillation_amplitude, cc.oscillation_f1, cc.oscillation_f2,
                   cc.oscillation_enabled if enabled is None else enabled)

    def offset(self, t: float) -> float:
        if not self.enabled:
            return 0.0
        return 0.5 * self.amplitude * (math.sin(2.0 * math.pi * self.f1 * t) + math.sin(2.0 * math.pi * self.f2 * t))


def shape_oscillation(cmd: WheelCommand, t: float, params: OscillationParams, u_max: float = math.inf) -> WheelCommand:
    """Add the excitation symmetrically to both wheels (pitch mode) and saturate."""
    if not params.enabled:
        return cmd
    delta = params.offset(t)
    return WheelCommand(cmd.u_left + delta, cmd.u_right + delta).saturated(u_max)


class TrajectoryTracker:
    """
    100 Hz control loop: reference, bridged estimate, PID, wheel commands.

    Args:
        trajectory: Reference to follow
        gains: PID gains
        drive: Drive geometry for the inverse kinematics
        oscillation: Excitation shaping parameters
        u_max: Wheel speed saturation (rad/s)
        bridge_mode: ``hold`` or ``interpolate``
    """

    def __init__(self, trajectory: ReferenceTrajectory, gains: PidGains, drive: DriveParams,
                 oscillation: OscillationParams, u_max: float, bridge_mode: str = "hold",
                 dt: float = CONTROL_DT):
        self.trajectory = trajectory
        self.gains = gains
        self.drive = drive
        self.oscillation = oscillation
        self.u_max = u_max
        self.dt = dt
        self.bridge = EstimateBridge(bridge_mode)
        self.memory = PidMemory()
        self.saturated_ticks = 0
        self.logger = logging.getLogger(__name__)

    def receive(self, estimate: PlanarEstimate) -> None:
        self.bridge.push(estimate)

    def tick(self, t: float) -> Tuple[WheelCommand, ReferenceState]:
        """Wheel command for control tick ``t``; zero until the first estimate arrives."""
        reference = self.trajectory(t)
        estimate = self.bridge.query(t)
        if estimate is None:
            return WheelCommand(0.0, 0.0), reference
        error = tracking_error(reference, estimate)
        v_cmd, omega_cmd, self.memory = pid_step(error, self.gains, self.memory, self.dt,
                                                 reference.v_ff, reference.omega_ff)
        raw = twist_to_wheels(v_cmd, omega_cmd, self.drive)
        cmd = shape_oscillation(raw.saturated(self.u_max), t, self.oscillation, self.u_max)
        if max(abs(raw.u_left), abs(raw.u_right)) > self.u_max:
            self.saturated_ticks += 1
        return cmd, reference
