"""
Frame-tagged rigid transforms and SO(3) helpers.

A transform ``T_AB`` maps points expressed in frame B into frame A:
``p_A = R_AB @ p_B + t_AB``. It is tagged ``to_frame=A`` and ``from_frame=B``,
so ``compose(T_AB, T_BC)`` is legal and ``compose(T_AB, T_CB)`` is not.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

import numpy as np

from ..exceptions import FrameMismatchError

_SMALL_ANGLE = 1e-8


class Frame(str, Enum):
    """Frame identifiers used throughout the simulator."""
    WORLD = "W"
    SHELL = "O"
    DRIVE = "I"
    LIDAR = "L"


FrameLike = Union[Frame, str]


def _frame_name(frame: FrameLike) -> str:
    return frame.value if isinstance(frame, Frame) else str(frame)


def hat(v) -> np.ndarray:
    """Skew-symmetric matrix such that ``hat(v) @ w == np.cross(v, w)``."""
    x, y, z = np.asarray(v, dtype=float)
    return np.array([[0.0, -z, y],
                     [z, 0.0, -x],
                     [-y, x, 0.0]])


def vee(m: np.ndarray) -> np.ndarray:
    """Inverse of :func:`hat`."""
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def exp_so3(omega) -> np.ndarray:
    """
    Rotation matrix of the rotation vector ``omega`` (Rodrigues formula).

    Args:
        omega: 3-vector, axis times angle in radians

    Returns:
        3x3 rotation matrix
    """
    omega = np.asarray(omega, dtype=float)
    theta = float(np.linalg.norm(omega))
    k = hat(omega)
    if theta < _SMALL_ANGLE:
        return np.eye(3) + k + 0.5 * (k @ k)
    return (np.eye(3)
            + (np.sin(theta) / theta) * k
            + ((1.0 - np.cos(theta)) / theta ** 2) * (k @ k))


def log_so3(rotation: np.ndarray) -> np.ndarray:
    """Rotation vector of a rotation matrix; inverse of :func:`exp_so3` for angles < pi."""
    cos_theta = np.clip((np.trace(rotation) - 1.0) / 2.0, -1.0, 1.0)
    theta = float(np.arccos(cos_theta))
    if theta < _SMALL_ANGLE:
        return 0.5 * vee(rotation - rotation.T)
    if np.pi - theta < 1e-6:
        # axis from the symmetric part; sign from the skew part
        sym = 0.5 * (rotation + np.eye(3))
        axis = np.sqrt(np.clip(np.diag(sym), 0.0, None))
        i = int(np.argmax(axis))
        axis = sym[:, i] / axis[i]
        axis /= np.linalg.norm(axis)
        skew = vee(rotation - rotation.T)
        if np.dot(skew, axis) < 0:
            axis = -axis
        return theta * axis
    return (theta / (2.0 * np.sin(theta))) * vee(rotation - rotation.T)


def right_jacobian(phi) -> np.ndarray:
    """Right Jacobian of SO(3)."""
    phi = np.asarray(phi, dtype=float)
    theta = float(np.linalg.norm(phi))
    k = hat(phi)
    if theta < 1e-5:
        return np.eye(3) - 0.5 * k + (k @ k) / 6.0
    return (np.eye(3)
            - ((1.0 - np.cos(theta)) / theta ** 2) * k
            + ((theta - np.sin(theta)) / theta ** 3) * (k @ k))


def right_jacobian_inv(phi) -> np.ndarray:
    """Inverse of the right Jacobian of SO(3)."""
    phi = np.asarray(phi, dtype=float)
    theta = float(np.linalg.norm(phi))
    k = hat(phi)
    if theta < 1e-5:
        return np.eye(3) + 0.5 * k + (k @ k) / 12.0
    coeff = 1.0 / theta ** 2 - (1.0 + np.cos(theta)) / (2.0 * theta * np.sin(theta))
    return np.eye(3) + 0.5 * k + coeff * (k @ k)


def renormalize(rotation: np.ndarray) -> np.ndarray:
    """Project a nearly orthonormal matrix back onto SO(3) (polar decomposition)."""
    u, _, vt = np.linalg.svd(rotation)
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] = -u[:, -1]
        r = u @ vt
    return r


def rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def orthonormality_error(rotation: np.ndarray) -> float:
    """Frobenius norm of ``R^T R - I``."""
    return float(np.linalg.norm(rotation.T @ rotation - np.eye(3)))


@dataclass(frozen=True)
class RigidTransform:
    """SE(3) pose mapping points from ``from_frame`` into ``to_frame``."""
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    to_frame: str = Frame.WORLD.value
    from_frame: str = Frame.SHELL.value

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3, 3))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))
        object.__setattr__(self, "to_frame", _frame_name(self.to_frame))
        object.__setattr__(self, "from_frame", _frame_name(self.from_frame))

    @classmethod
    def identity(cls, to_frame: FrameLike, from_frame: FrameLike) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3), to_frame, from_frame)

    def apply(self, points) -> np.ndarray:
        """Map a point (3,) or a point array (N, 3) from ``from_frame`` into ``to_frame``."""
        points = np.asarray(points, dtype=float)
        return points @ self.rotation.T + self.translation

    def rotate(self, vectors) -> np.ndarray:
        """Rotate direction vectors without translating them."""
        return np.asarray(vectors, dtype=float) @ self.rotation.T

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def retract(self, delta_translation, delta_rotation) -> "RigidTransform":
        """Right-perturbed pose ``(t + dt, R exp(dphi))``."""
        return RigidTransform(self.rotation @ exp_so3(delta_rotation),
                              self.translation + np.asarray(delta_translation, dtype=float),
                              self.to_frame, self.from_frame)

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return compose(self, other)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """
    Chain two transforms: ``compose(T_AB, T_BC) = T_AC``.

    Frame tags are checked unless Python runs with ``-O``.

    Raises:
        FrameMismatchError: if ``b.to_frame != a.from_frame``
    """
    if __debug__ and b.to_frame != a.from_frame:
        raise FrameMismatchError(a.from_frame, b.to_frame)
    return RigidTransform(a.rotation @ b.rotation,
                          a.rotation @ b.translation + a.translation,
                          a.to_frame, b.from_frame)


def inverse(t: RigidTransform) -> RigidTransform:
    """Inverse transform with swapped frame tags."""
    rt = t.rotation.T
    return RigidTransform(rt, -rt @ t.translation, t.from_frame, t.to_frame)
