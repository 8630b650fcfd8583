"""
Drive-shell dynamics of the pendulum-driven spherical robot.

Model summary:
    * Wheel speeds follow the commanded speeds through a first-order motor lag.
    * The drive unit is a point mass at radius ``l`` from the shell center.
      Its in-shell swing angles (alpha: fore/aft, beta: sideways) follow a
      linearised damped pendulum forced by the drive's forward acceleration,
      the lean needed against rolling resistance and grade, and the lateral
      acceleration while turning. The pendulum is stepped with an exact
      zero-order-hold discretisation.
    * The shell frame O carries the sensor mast. Its tilt obeys
      ``I_O w' = tau_g + tau_d - w x (I_O w)`` with ``tau_g = c_O x m g_O``
      and ``tau_d`` = viscous contact damping plus the reaction of the drive
      swing. Yaw is kinematic (drive yaw rate).
    * Translation is slip-free rolling at the drive speed, along the local
      surface tangent; the shell spin satisfies the rolling constraint exactly.
"""
import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Protocol, Tuple

import numpy as np
from scipy.linalg import expm

from ..exceptions import IntegrationDivergenceError
from ..geometry import Frame, RigidTransform, exp_so3, log_so3, renormalize, rot_x, rot_y, rot_z

logger = logging.getLogger(__name__)

E_Z = np.array([0.0, 0.0, 1.0])
MAX_DT = 0.01


@dataclass(frozen=True)
class DriveParams:
    """Internal differential drive geometry."""
    wheel_radius: float = 0.05
    track_width: float = 0.20
    drive_mass_fraction: float = 0.5
    drive_offset_radius: float = 0.08

    def __post_init__(self):
        if self.wheel_radius <= 0 or self.track_width <= 0:
            raise ValueError("wheel_radius and track_width must be > 0")
        if not 0.0 < self.drive_mass_fraction < 1.0:
            raise ValueError("drive_mass_fraction must be in (0, 1)")
        if self.drive_offset_radius < 0:
            raise ValueError("drive_offset_radius must be >= 0")


@dataclass(frozen=True)
class ShellParams:
    """Shell geometry, mass properties, tilt damping at the contact and rolling resistance."""
    shell_radius: float = 0.125
    total_mass: float = 1.8
    inertia: np.ndarray = field(default_factory=lambda: np.diag([0.012, 0.012, 0.012]))
    contact_damping: float = 0.02
    rolling_resistance: float = 0.05
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))

    def __post_init__(self):
        inertia = np.asarray(self.inertia, dtype=float).reshape(3, 3)
        object.__setattr__(self, "inertia", inertia)
        object.__setattr__(self, "gravity", np.asarray(self.gravity, dtype=float).reshape(3))
        if self.shell_radius <= 0 or self.total_mass <= 0:
            raise ValueError("shell_radius and total_mass must be > 0")
        if not np.allclose(inertia, inertia.T) or np.any(np.linalg.eigvalsh(inertia) <= 0):
            raise ValueError("inertia must be symmetric positive definite")
        if self.contact_damping < 0 or self.rolling_resistance < 0:
            raise ValueError("contact_damping and rolling_resistance must be >= 0")

    @property
    def g(self) -> float:
        return float(np.linalg.norm(self.gravity))


@dataclass(frozen=True)
class VehicleParams:
    """Complete parameter set for :func:`step`."""
    drive: DriveParams = field(default_factory=DriveParams)
    shell: ShellParams = field(default_factory=ShellParams)
    max_wheel_speed: float = 25.0
    motor_time_constant: float = 0.1
    drive_damping: float = 2.0
    freeze_attitude: bool = False

    @classmethod
    def from_config(cls, vehicle_config, freeze_attitude: bool = False) -> "VehicleParams":
        vc = vehicle_config
        return cls(
            drive=DriveParams(vc.wheel_radius, vc.track_width, vc.drive_mass_fraction, vc.drive_offset_radius),
            shell=ShellParams(vc.shell_radius, vc.total_mass, np.diag(vc.inertia), vc.contact_damping,
                              vc.rolling_resistance, np.array([0.0, 0.0, -vc.gravity])),
            max_wheel_speed=vc.max_wheel_speed,
            motor_time_constant=vc.motor_time_constant,
            drive_damping=vc.drive_damping,
            freeze_attitude=freeze_attitude,
        )


@dataclass(frozen=True)
class WheelCommand:
    """Left/right wheel angular velocities in rad/s."""
    u_left: float = 0.0
    u_right: float = 0.0

    def saturated(self, u_max: float) -> "WheelCommand":
        return WheelCommand(float(np.clip(self.u_left, -u_max, u_max)),
                            float(np.clip(self.u_right, -u_max, u_max)))

    def mirrored(self) -> "WheelCommand":
        return WheelCommand(self.u_right, self.u_left)

    def as_array(self) -> np.ndarray:
        return np.array([self.u_left, self.u_right])


class Terrain(Protocol):
    def surface_below(self, x: float, y: float) -> Tuple[float, np.ndarray]:
        """Ground height and unit surface normal under (x, y)."""


class FlatTerrain:
    """Horizontal ground plane at z = 0."""

    def surface_below(self, x: float, y: float) -> Tuple[float, np.ndarray]:
        return 0.0, E_Z.copy()


@dataclass(frozen=True)
class SimState:
    """
    True simulator state.

    ``T_WO`` is the pose of the non-rolling mast frame O (heading times tilt)
    carrying the sensors, ``omega_O`` its body rate, ``shell_spin`` the
    rolling spin of the shell surface (world frame), ``shell_attitude`` the
    integrated orientation of the shell surface and
    ``pendulum`` = (alpha, alpha_dot, beta, beta_dot).
    """
    T_WO: RigidTransform
    v_O_world: np.ndarray
    omega_O: np.ndarray
    T_OI: RigidTransform
    t: float = 0.0
    heading: float = 0.0
    tilt: np.ndarray = field(default_factory=lambda: np.eye(3))
    tilt_rate: np.ndarray = field(default_factory=lambda: np.zeros(3))
    wheel_speeds: np.ndarray = field(default_factory=lambda: np.zeros(2))
    pendulum: np.ndarray = field(default_factory=lambda: np.zeros(4))
    shell_spin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    shell_attitude: np.ndarray = field(default_factory=lambda: np.eye(3))

    @property
    def position(self) -> np.ndarray:
        return self.T_WO.translation

    @property
    def pitch(self) -> float:
        """Nose-down positive pitch of O relative to gravity."""
        return float(np.arcsin(np.clip(-self.T_WO.rotation[2, 0], -1.0, 1.0)))

    @property
    def roll(self) -> float:
        r = self.T_WO.rotation
        return float(np.arctan2(r[2, 1], r[2, 2]))


def drive_pose(alpha: float, beta: float, offset_radius: float) -> RigidTransform:
    """In-shell pose T_OI of the drive swung by ``alpha`` (fore) and ``beta`` (side)."""
    rotation = rot_y(-alpha) @ rot_x(beta)
    position = rotation @ np.array([0.0, 0.0, -offset_radius])
    return RigidTransform(rotation, position, Frame.SHELL, Frame.DRIVE)


def initial_state(position=(0.0, 0.0, 0.125), heading: float = 0.0,
                  params: Optional[VehicleParams] = None,
                  terrain: Optional[Terrain] = None) -> SimState:
    """Robot at rest, pendulum hanging, shell level, placed on the terrain."""
    params = params or VehicleParams()
    x, y, z = (float(c) for c in position)
    if terrain is not None:
        h, n = terrain.surface_below(x, y)
        z = h + params.shell.shell_radius / n[2]
    rotation = rot_z(heading)
    return SimState(
        T_WO=RigidTransform(rotation, np.array([x, y, z]), Frame.WORLD, Frame.SHELL),
        v_O_world=np.zeros(3),
        omega_O=np.zeros(3),
        T_OI=drive_pose(0.0, 0.0, params.drive.drive_offset_radius),
        t=0.0,
        heading=heading,
    )


def wheel_to_body_twist(cmd: WheelCommand, p: DriveParams) -> Tuple[np.ndarray, np.ndarray]:
    """
    Differential-drive kinematics of the internal drive.

    Returns:
        (v_I, omega_I): linear and angular velocity of the drive in frame I
    """
    r, d = p.wheel_radius, p.track_width
    v_i = np.array([0.5 * r * (cmd.u_left + cmd.u_right), 0.0, 0.0])
    omega_i = np.array([0.0, 0.0, (r / d) * (cmd.u_right - cmd.u_left)])
    return v_i, omega_i


def shell_velocity(T_OI: RigidTransform, v_I) -> np.ndarray:
    """Shell surface velocity under the drive, ``v_O = -R_OI v_I``."""
    return -(T_OI.rotation @ np.asarray(v_I, dtype=float))


def rolling_omega(v_O, R_s: float, normal=E_Z) -> np.ndarray:
    """Angular velocity fixed by slip-free rolling: ``(1/R_s) (n x v_O)``."""
    if R_s <= 0:
        raise ValueError("shell radius must be > 0")
    return np.cross(np.asarray(normal, dtype=float), np.asarray(v_O, dtype=float)) / R_s


def com_offset(T_OI: RigidTransform, p: DriveParams) -> np.ndarray:
    """Center-of-mass offset of the robot in O caused by the drive position."""
    return p.drive_mass_fraction * T_OI.translation


def gravity_torque(c_O, m: float, g_O) -> np.ndarray:
    """Gravity torque ``c_O x (m g_O)``."""
    return np.cross(np.asarray(c_O, dtype=float), m * np.asarray(g_O, dtype=float))


def rolling_residual(previous: SimState, state: SimState, params: VehicleParams,
                     terrain: Optional[Terrain] = None) -> float:
    """
    Speed (m/s) of the shell material at the contact point between two states.

    The shell rate comes from the change of the integrated shell attitude and
    the center velocity from the change of position, so the check does not
    reuse the spin stored in the state.
    """
    dt = state.t - previous.t
    if dt <= 0:
        raise ValueError("states must be in time order")
    terrain = terrain or FlatTerrain()
    _, n = terrain.surface_below(*state.position[:2])
    omega = log_so3(state.shell_attitude @ previous.shell_attitude.T) / dt
    velocity = (state.position - previous.position) / dt
    contact = -params.shell.shell_radius * n
    return float(np.linalg.norm(velocity + np.cross(omega, contact)))


def pendulum_energy(state: SimState, params: VehicleParams) -> float:
    """Mechanical energy (J) of the linearised drive pendulum mode."""
    l = params.drive.drive_offset_radius
    m_d = params.drive.drive_mass_fraction * params.shell.total_mass
    alpha, alpha_dot, beta, beta_dot = state.pendulum
    kinetic = 0.5 * m_d * l ** 2 * (alpha_dot ** 2 + beta_dot ** 2)
    potential = 0.5 * m_d * params.shell.g * l * (alpha ** 2 + beta ** 2)
    return float(kinetic + potential)


@lru_cache(maxsize=64)
def _pendulum_discretisation(g: float, l: float, damping: float, dt: float) -> Tuple[np.ndarray, np.ndarray]:
    """Exact zero-order-hold transition (phi, gamma) of x'' = f/l - (g/l) x - c x'."""
    a = np.zeros((3, 3))
    a[0, 1] = 1.0
    a[1, 0] = -g / l
    a[1, 1] = -damping
    a[1, 2] = 1.0 / l
    m = expm(a * dt)
    return m[:2, :2].copy(), m[:2, 2].copy()


def _check_finite(t: float, **quantities) -> None:
    for name, value in quantities.items():
        if not np.all(np.isfinite(value)):
            raise IntegrationDivergenceError(name, t)


def step(state: SimState, cmd: WheelCommand, dt: float, params: VehicleParams,
         terrain: Optional[Terrain] = None) -> SimState:
    """
    Advance the simulator by one time step (semi-implicit Euler).

    Args:
        state: Current state
        cmd: Wheel command, saturated to ``params.max_wheel_speed``
        dt: Time step in seconds, 0 < dt <= 0.01
        params: Vehicle parameters
        terrain: Ground model; flat ground at z = 0 when None

    Returns:
        The next state

    Raises:
        IntegrationDivergenceError: if any integrated quantity becomes non-finite
    """
    if not 0.0 < dt <= MAX_DT:
        raise ValueError(f"dt must be in (0, {MAX_DT}], got {dt}")
    terrain = terrain or FlatTerrain()
    drive, shell = params.drive, params.shell
    g = shell.g
    l = drive.drive_offset_radius
    m = shell.total_mass
    mu = drive.drive_mass_fraction
    t_next = state.t + dt

    # motor lag, exact for a constant command over dt
    u = cmd.saturated(params.max_wheel_speed).as_array()
    decay = np.exp(-dt / params.motor_time_constant)
    wheels = u + (state.wheel_speeds - u) * decay
    wheel_accel = (wheels - state.wheel_speeds) / dt
    v_i, omega_i = wheel_to_body_twist(WheelCommand(*wheels), drive)
    speed = v_i[0]
    yaw_rate = omega_i[2]
    accel_forward = 0.5 * drive.wheel_radius * (wheel_accel[0] + wheel_accel[1])

    # surface tangent along the heading
    x, y, _ = state.position
    _, normal = terrain.surface_below(x, y)
    heading_dir = np.array([np.cos(state.heading), np.sin(state.heading), 0.0])
    tangent = heading_dir - np.dot(heading_dir, normal) * normal
    tangent /= np.linalg.norm(tangent)
    grade = tangent[2]

    # drive pendulum
    pendulum = state.pendulum.copy()
    alpha_ddot = beta_ddot = 0.0
    if l > 0:
        lean = (shell.rolling_resistance * speed / shell.shell_radius
                + m * g * shell.shell_radius * grade) / (mu * m * l)
        if abs(lean) > g:
            logger.warning(f"Required drive lean exceeds 90 degrees at t={t_next:.2f} s (grade {grade:.3f})")
        phi, gamma = _pendulum_discretisation(g, l, params.drive_damping, dt)
        forcing_alpha = accel_forward + lean
        forcing_beta = -speed * yaw_rate
        pendulum[0:2] = phi @ pendulum[0:2] + gamma * forcing_alpha
        pendulum[2:4] = phi @ pendulum[2:4] + gamma * forcing_beta
        alpha_ddot = forcing_alpha / l - (g / l) * pendulum[0] - params.drive_damping * pendulum[1]
        beta_ddot = forcing_beta / l - (g / l) * pendulum[2] - params.drive_damping * pendulum[3]
    t_oi = drive_pose(pendulum[0], pendulum[2], l)

    # shell tilt
    heading = state.heading + yaw_rate * dt
    if params.freeze_attitude:
        tilt = np.eye(3)
        tilt_rate = np.zeros(3)
    else:
        rotation = rot_z(state.heading) @ state.tilt
        g_o = rotation.T @ shell.gravity
        tau_g = gravity_torque(com_offset(t_oi, drive), m, g_o)
        inertia_drive = mu * m * l ** 2
        tau_reaction = np.array([-inertia_drive * beta_ddot, inertia_drive * alpha_ddot, 0.0])
        tau_d = -shell.contact_damping * state.tilt_rate + tau_reaction
        w = state.tilt_rate
        gyroscopic = np.cross(w, shell.inertia @ w)
        w_dot = np.linalg.solve(shell.inertia, tau_g + tau_d - gyroscopic)
        w_dot[2] = 0.0
        tilt_rate = w + w_dot * dt
        tilt = renormalize(state.tilt @ exp_so3(tilt_rate * dt))

    # slip-free translation along the surface
    if speed != 0.0:
        direction = rot_z(state.heading) @ -shell_velocity(t_oi, v_i)
        direction -= np.dot(direction, normal) * normal
        v_world = abs(speed) * direction / np.linalg.norm(direction)
    else:
        v_world = np.zeros(3)
    position = state.position + v_world * dt
    height, normal_next = terrain.surface_below(position[0], position[1])
    position[2] = height + shell.shell_radius / normal_next[2]

    rotation = rot_z(heading) @ tilt
    omega_o = tilt_rate + tilt.T @ np.array([0.0, 0.0, yaw_rate])
    spin = rolling_omega(v_world, shell.shell_radius, normal_next)
    shell_attitude = renormalize(exp_so3(spin * dt) @ state.shell_attitude)

    _check_finite(t_next, position=position, velocity=v_world, rotation=rotation,
                  tilt_rate=tilt_rate, pendulum=pendulum, wheel_speeds=wheels)

    return replace(
        state,
        T_WO=RigidTransform(rotation, position, Frame.WORLD, Frame.SHELL),
        v_O_world=v_world,
        omega_O=omega_o,
        T_OI=t_oi,
        t=t_next,
        heading=heading,
        tilt=tilt,
        tilt_rate=tilt_rate,
        wheel_speeds=wheels,
        pendulum=pendulum,
        shell_spin=spin,
        shell_attitude=shell_attitude,
    )


def steady_state_pitch(speed: float, params: VehicleParams, grade: float = 0.0) -> float:
    """Analytic steady pitch (rad) at constant speed: drive lean balances damping and grade."""
    shell, drive = params.shell, params.drive
    lean = (shell.rolling_resistance * speed / shell.shell_radius
            + shell.total_mass * shell.g * shell.shell_radius * grade) / (
        drive.drive_mass_fraction * shell.total_mass * drive.drive_offset_radius)
    return lean / shell.g
