"""
Reference trajectories parameterised by arc length.

Every kind starts at its local origin and is placed in the world by an anchor
pose ``(x, y, yaw)``:

    figure8  two tangent circles of 0.5 m radius, first counter-clockwise
             about (0, 0.5) then clockwise about (0, -0.5); starts at the
             tangency point heading +x
    circle   radius 1 m about the origin, starts at (1, 0) heading +y
    oval     ellipse with 2 m and 1 m semi-axes about the origin, starts at
             (2, 0) heading +y
    line     straight segment along +x, holds its end point once reached
    loop     circle of configurable radius about the origin (used to orbit a
             target), starts at (r, 0) heading +y
"""
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from ..config import TRAJECTORY_KINDS
from ..exceptions import UnknownKindError

FIGURE8_RADIUS = 0.5
CIRCLE_RADIUS = 1.0
OVAL_SEMI_AXES = (2.0, 1.0)
_OVAL_SAMPLES = 4001


def wrap_angle(angle: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class ReferenceState:
    """Desired state x* at one instant, with its feed-forward twist."""
    t: float
    position: np.ndarray
    heading: float
    v_ff: float
    omega_ff: float
    arc_length: float = 0.0


@lru_cache(maxsize=8)
def _ellipse_table(a: float, b: float) -> Tuple[np.ndarray, np.ndarray]:
    u = np.linspace(0.0, 2.0 * np.pi, _OVAL_SAMPLES)
    speed = np.hypot(a * np.sin(u), b * np.cos(u))
    s = cumulative_trapezoid(speed, u, initial=0.0)
    return s, u


def ellipse_perimeter(a: float = OVAL_SEMI_AXES[0], b: float = OVAL_SEMI_AXES[1]) -> float:
    s, _ = _ellipse_table(a, b)
    return float(s[-1])


def lap_length(kind: str, loop_radius: float = 1.35, line_length: float = 7.0) -> float:
    """Length in meters of one lap (or of the whole segment for ``line``)."""
    if kind == "figure8":
        return 2.0 * (2.0 * math.pi * FIGURE8_RADIUS)
    if kind == "circle":
        return 2.0 * math.pi * CIRCLE_RADIUS
    if kind == "oval":
        return ellipse_perimeter()
    if kind == "line":
        return line_length
    if kind == "loop":
        return 2.0 * math.pi * loop_radius
    raise UnknownKindError("trajectory", kind, TRAJECTORY_KINDS)


def _local_pose(kind: str, s: float, speed: float, loop_radius: float,
                line_length: float) -> Tuple[float, float, float, float, float]:
    """(x, y, heading, v_ff, omega_ff) at arc length ``s`` in the trajectory's own frame."""
    if kind == "figure8":
        r = FIGURE8_RADIUS
        half = 2.0 * math.pi * r
        s = s % (2.0 * half)
        if s < half:
            theta = s / r
            return r * math.sin(theta), r - r * math.cos(theta), theta, speed, speed / r
        theta = (s - half) / r
        return r * math.sin(theta), -r + r * math.cos(theta), -theta, speed, -speed / r
    if kind in ("circle", "loop"):
        r = CIRCLE_RADIUS if kind == "circle" else loop_radius
        phi = s / r
        return r * math.cos(phi), r * math.sin(phi), phi + math.pi / 2.0, speed, speed / r
    if kind == "oval":
        a, b = OVAL_SEMI_AXES
        table_s, table_u = _ellipse_table(a, b)
        u = float(np.interp(s % table_s[-1], table_s, table_u))
        su, cu = math.sin(u), math.cos(u)
        curvature = a * b / (a * a * su * su + b * b * cu * cu) ** 1.5
        return a * cu, b * su, math.atan2(b * cu, -a * su), speed, speed * curvature
    if kind == "line":
        if s >= line_length:
            return line_length, 0.0, 0.0, 0.0, 0.0
        return s, 0.0, 0.0, speed, 0.0
    raise UnknownKindError("trajectory", kind, TRAJECTORY_KINDS)


def reference_state(kind: str, speed: float, t: float, anchor=(0.0, 0.0, 0.0),
                    loop_radius: float = 1.35, line_length: float = 7.0) -> ReferenceState:
    """
    Desired state of a reference trajectory at time ``t``.

    Args:
        kind: One of figure8, circle, oval, line, loop
        speed: Constant path speed in m/s
        t: Time in seconds, t >= 0
        anchor: World placement (x, y, yaw) of the trajectory's local frame
        loop_radius: Radius of the ``loop`` kind
        line_length: Length of the ``line`` kind

    Returns:
        ReferenceState in world coordinates

    Raises:
        UnknownKindError: for an unknown kind
        ValueError: if t < 0
    """
    if kind not in TRAJECTORY_KINDS:
        raise UnknownKindError("trajectory", kind, TRAJECTORY_KINDS)
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    s = speed * t
    x, y, heading, v_ff, omega_ff = _local_pose(kind, s, speed, loop_radius, line_length)
    ax, ay, yaw = anchor
    c, si = math.cos(yaw), math.sin(yaw)
    position = np.array([ax + c * x - si * y, ay + si * x + c * y])
    return ReferenceState(t, position, wrap_angle(heading + yaw), v_ff, omega_ff, s)


@dataclass(frozen=True)
class ReferenceTrajectory:
    """A reference kind bound to a speed and a world anchor."""
    kind: str
    speed: float = 0.5
    anchor: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    loop_radius: float = 1.35
    line_length: float = 7.0

    def __post_init__(self):
        if self.kind not in TRAJECTORY_KINDS:
            raise UnknownKindError("trajectory", self.kind, TRAJECTORY_KINDS)
        if self.speed <= 0:
            raise ValueError("speed must be > 0")

    def __call__(self, t: float) -> ReferenceState:
        return reference_state(self.kind, self.speed, t, self.anchor, self.loop_radius, self.line_length)

    @property
    def lap_length(self) -> float:
        return lap_length(self.kind, self.loop_radius, self.line_length)

    @property
    def lap_time(self) -> float:
        return self.lap_length / self.speed
