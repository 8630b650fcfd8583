"""
Synthetic scenes built from rectangles and triangles, with ray casting.
"""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..exceptions import UnknownKindError
from ..geometry import rot_z
from .voxels import VoxelGrid, voxelize

logger = logging.getLogger(__name__)

_EPS = 1e-12
_MIN_RANGE = 1e-9
RAMP_ANGLE_DEG = 14.0


@dataclass(frozen=True)
class Surface:
    """
    Planar primitive: a rectangle ``corner + a e1 + b e2`` with a, b in [0, 1],
    or a triangle ``corner + a e1 + b e2`` with a, b >= 0 and a + b <= 1.
    """
    surface_id: str
    corner: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    triangle: bool = False
    walkable: bool = False

    def __post_init__(self):
        for name in ("corner", "e1", "e2"):
            value = np.asarray(getattr(self, name), dtype=float).reshape(3)
            if not np.all(np.isfinite(value)):
                raise ValueError(f"surface {self.surface_id}: non-finite {name}")
            object.__setattr__(self, name, value)
        if np.linalg.norm(np.cross(self.e1, self.e2)) < _EPS:
            raise ValueError(f"surface {self.surface_id}: degenerate edges")

    @property
    def normal(self) -> np.ndarray:
        n = np.cross(self.e1, self.e2)
        return n / np.linalg.norm(n)

    @property
    def area(self) -> float:
        a = float(np.linalg.norm(np.cross(self.e1, self.e2)))
        return 0.5 * a if self.triangle else a

    def intersect(self, origin: np.ndarray, directions: np.ndarray, max_range: float) -> np.ndarray:
        """
        Ray parameters of the hits on this surface.

        Args:
            origin: Common ray origin (3,)
            directions: Unit directions (N, 3)
            max_range: Hits farther than this are ignored

        Returns:
            Array (N,) of ranges, ``inf`` where the ray misses
        """
        # barycentric solve (Moller-Trumbore), valid for both shapes
        p = np.cross(directions, self.e2)
        det = p @ self.e1
        ok = np.abs(det) > _EPS
        inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        s = origin - self.corner
        a = (p @ s) * inv
        q = np.cross(s, self.e1)
        b = (directions @ q) * inv
        t = (q @ self.e2) * inv
        inside = (a >= 0.0) & (b >= 0.0)
        if self.triangle:
            inside &= (a + b) <= 1.0
        else:
            inside &= (a <= 1.0) & (b <= 1.0)
        hit = ok & inside & (t > _MIN_RANGE) & (t <= max_range)
        return np.where(hit, t, np.inf)

    def sample(self, spacing: float) -> np.ndarray:
        """Cell-centered sample points no farther than ``spacing`` apart."""
        n1 = max(1, int(math.ceil(np.linalg.norm(self.e1) / spacing)))
        n2 = max(1, int(math.ceil(np.linalg.norm(self.e2) / spacing)))
        a, b = np.meshgrid((np.arange(n1) + 0.5) / n1, (np.arange(n2) + 0.5) / n2, indexing="ij")
        a, b = a.ravel(), b.ravel()
        if self.triangle:
            keep = a + b <= 1.0
            a, b = a[keep], b[keep]
        return self.corner + np.outer(a, self.e1) + np.outer(b, self.e2)


@dataclass(frozen=True)
class Scene:
    """Immutable set of surfaces plus named anchor poses for trajectories."""
    kind: str
    surfaces: Tuple[Surface, ...]
    anchors: Dict[str, Tuple[float, float, float]] = field(default_factory=dict)
    target_prefix: str = "dummy"

    def __post_init__(self):
        object.__setattr__(self, "surfaces", tuple(self.surfaces))
        if self.surfaces and not any(s.walkable for s in self.surfaces):
            raise ValueError(f"scene '{self.kind}' has no floor surface")

    def surface(self, surface_id: str) -> Surface:
        for s in self.surfaces:
            if s.surface_id == surface_id:
                return s
        raise KeyError(surface_id)

    def anchor(self, trajectory_kind: str) -> Tuple[float, float, float]:
        """(x, y, yaw) placement of a trajectory kind in this scene."""
        return self.anchors.get(trajectory_kind, self.anchors.get("default", (0.0, 0.0, 0.0)))

    def cast(self, origin, directions, max_range: float) -> Tuple[np.ndarray, np.ndarray]:
        """
        Cast many rays from one origin.

        Returns:
            (ranges, surface_index): ``inf`` / ``-1`` where nothing was hit
        """
        origin = np.asarray(origin, dtype=float)
        directions = np.asarray(directions, dtype=float).reshape(-1, 3)
        best = np.full(len(directions), np.inf)
        index = np.full(len(directions), -1, dtype=np.int64)
        for i, s in enumerate(self.surfaces):
            t = s.intersect(origin, directions, max_range)
            closer = t < best
            best[closer] = t[closer]
            index[closer] = i
        return best, index

    def surface_below(self, x: float, y: float) -> Tuple[float, np.ndarray]:
        """Height and upward normal of the highest walkable surface under (x, y)."""
        origin = np.array([x, y, 100.0])
        down = np.array([[0.0, 0.0, -1.0]])
        best_t, best_n = np.inf, np.array([0.0, 0.0, 1.0])
        for s in self.surfaces:
            if not s.walkable:
                continue
            t = s.intersect(origin, down, 200.0)[0]
            if t < best_t:
                best_t = t
                n = s.normal
                best_n = n if n[2] > 0 else -n
        if not np.isfinite(best_t):
            return 0.0, np.array([0.0, 0.0, 1.0])
        return float(100.0 - best_t), best_n

    def target_surfaces(self) -> List[Surface]:
        return [s for s in self.surfaces if s.surface_id.startswith(self.target_prefix)]


def raycast(scene: Scene, origin, direction, max_range: float) -> Optional[Tuple[np.ndarray, str]]:
    """
    Nearest intersection of one ray with the scene.

    Returns:
        (hit_point, surface_id) or None when nothing is hit within max_range
    """
    direction = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    ranges, index = scene.cast(origin, direction[None, :], max_range)
    if index[0] < 0:
        return None
    return np.asarray(origin, dtype=float) + ranges[0] * direction, scene.surfaces[index[0]].surface_id


def reference_voxels(scene: Scene, resolution: float, surfaces: Optional[Sequence[Surface]] = None) -> VoxelGrid:
    """
    Dense analytic voxelization of the scene surfaces.

    Args:
        scene: Scene to voxelize
        resolution: Voxel edge length in meters
        surfaces: Optional subset of surfaces (e.g. the ground target)

    Returns:
        VoxelGrid of every voxel touched by a surface sample
    """
    if resolution <= 0:
        raise ValueError("resolution must be > 0")
    surfaces = scene.surfaces if surfaces is None else surfaces
    samples = [s.sample(resolution / 4.0) for s in surfaces]
    if not samples:
        return VoxelGrid(resolution)
    return voxelize(np.vstack(samples), resolution)


# --- primitive builders ---------------------------------------------------

def quad(surface_id: str, corner, e1, e2, walkable: bool = False) -> Surface:
    return Surface(surface_id, np.asarray(corner, float), np.asarray(e1, float), np.asarray(e2, float),
                   walkable=walkable)


def box(surface_id: str, center, size, yaw: float = 0.0, bottom: bool = False,
        walkable_top: bool = False) -> List[Surface]:
    """Faces of a box resting with its given center and (sx, sy, sz) size."""
    c = np.asarray(center, dtype=float)
    sx, sy, sz = size
    r = rot_z(yaw)
    ex, ey, ez = r[:, 0] * sx, r[:, 1] * sy, np.array([0.0, 0.0, sz])
    lo = c - 0.5 * (ex + ey + ez)
    faces = [
        quad(f"{surface_id}/top", lo + ez, ex, ey, walkable=walkable_top),
        quad(f"{surface_id}/-x", lo, ez, ey),
        quad(f"{surface_id}/+x", lo + ex, ey, ez),
        quad(f"{surface_id}/-y", lo, ex, ez),
        quad(f"{surface_id}/+y", lo + ey, ez, ex),
    ]
    if bottom:
        faces.append(quad(f"{surface_id}/bottom", lo, ey, ex))
    return faces


def ramp(surface_id: str, start, yaw: float, run: float, width: float, angle_deg: float) -> List[Surface]:
    """Inclined plane rising along ``yaw`` from ``start`` (center of the low edge)."""
    r = rot_z(yaw)
    forward, left = r[:, 0], r[:, 1]
    rise = run * math.tan(math.radians(angle_deg))
    low_right = np.asarray(start, dtype=float) - 0.5 * width * left
    slope = forward * run + np.array([0.0, 0.0, rise])
    high_right = low_right + forward * run
    return [
        quad(f"{surface_id}/slope", low_right, slope, left * width, walkable=True),
        Surface(f"{surface_id}/side_r", low_right, forward * run, slope, triangle=True),
        Surface(f"{surface_id}/side_l", low_right + left * width, slope, forward * run, triangle=True),
        quad(f"{surface_id}/back", high_right, np.array([0.0, 0.0, rise]), left * width),
    ]


def _room(prefix: str, x_range, y_range, height: float, floor: bool = True) -> List[Surface]:
    (x0, x1), (y0, y1) = x_range, y_range
    lx, ly = x1 - x0, y1 - y0
    up = np.array([0.0, 0.0, height])
    floors = [quad(f"{prefix}/floor", (x0, y0, 0.0), (lx, 0, 0), (0, ly, 0), walkable=True)] if floor else []
    return floors + [
        quad(f"{prefix}/wall_-y", (x0, y0, 0.0), (lx, 0, 0), up),
        quad(f"{prefix}/wall_+y", (x0, y1, 0.0), up, (lx, 0, 0)),
        quad(f"{prefix}/wall_-x", (x0, y0, 0.0), up, (0, ly, 0)),
        quad(f"{prefix}/wall_+x", (x1, y0, 0.0), (0, ly, 0), up),
    ]


def _lab() -> Scene:
    surfaces = _room("lab", (-4.0, 4.0), (-4.0, 4.0), 2.5)
    furniture = [
        ("desk_1", (-3.2, -2.0, 0.375), (0.8, 1.6, 0.75)),
        ("desk_2", (-3.2, 1.5, 0.375), (0.8, 1.6, 0.75)),
        ("desk_3", (3.2, -1.0, 0.375), (0.8, 2.0, 0.75)),
        ("cabinet", (3.5, 3.0, 0.9), (0.6, 1.2, 1.8)),
        ("chair_1", (-2.5, -2.0, 0.25), (0.5, 0.5, 0.5)),
        ("chair_2", (2.5, -1.0, 0.25), (0.5, 0.5, 0.5)),
        ("equipment", (0.0, 3.4, 0.6), (1.4, 0.8, 1.2)),
        ("crate", (-0.5, -3.4, 0.2), (0.6, 0.6, 0.4)),
    ]
    for name, center, size in furniture:
        surfaces += box(f"lab/{name}", center, size)
    return Scene("lab", tuple(surfaces), anchors={"default": (0.0, 0.0, 0.0)})


def slotted_ceiling(prefix: str, x_range, y_range, height: float, centers: Sequence[float],
                    width: float, depth: float) -> List[Surface]:
    """
    Ceiling at ``height`` broken by transverse slots open at the bottom.

    Each slot spans the full y range, is ``width`` long in x and rises
    ``depth`` above the ceiling; its inside is only seen along steep rays.
    """
    (x0, x1), (y0, y1) = x_range, y_range
    ly = y1 - y0
    rise = np.array([0.0, 0.0, depth])
    surfaces: List[Surface] = []
    edge = x0
    for k, c in enumerate(centers):
        a, b = c - 0.5 * width, c + 0.5 * width
        if not x0 < a < b < x1 or a < edge:
            raise ValueError(f"slot {k} at x={c} overlaps its neighbour or the end walls")
        surfaces.append(quad(f"{prefix}/ceiling_{k:02d}", (edge, y0, height), (a - edge, 0, 0), (0, ly, 0)))
        slot = f"{prefix}/slot_{k:02d}"
        surfaces += [
            quad(f"{slot}/-x", (a, y0, height), (0, ly, 0), rise),
            quad(f"{slot}/+x", (b, y0, height), rise, (0, ly, 0)),
            quad(f"{slot}/top", (a, y0, height + depth), (width, 0, 0), (0, ly, 0)),
            quad(f"{slot}/-y", (a, y0, height), (width, 0, 0), rise),
            quad(f"{slot}/+y", (a, y1, height), rise, (width, 0, 0)),
        ]
        edge = b
    surfaces.append(quad(f"{prefix}/ceiling_{len(centers):02d}", (edge, y0, height), (x1 - edge, 0, 0), (0, ly, 0)))
    return surfaces


def floor_with_pit(prefix: str, x_range, y_range, pit_x, pit_y, depth: float) -> List[Surface]:
    """Walkable floor at z = 0 around a rectangular pit with a walkable bottom at ``-depth``."""
    (x0, x1), (y0, y1) = x_range, y_range
    (px0, px1), (py0, py1) = pit_x, pit_y
    if not (x0 < px0 < px1 < x1 and y0 < py0 < py1 < y1):
        raise ValueError("pit must lie inside the floor")
    down = np.array([0.0, 0.0, -depth])
    return [
        quad(f"{prefix}/floor_s", (x0, y0, 0.0), (x1 - x0, 0, 0), (0, py0 - y0, 0), walkable=True),
        quad(f"{prefix}/floor_n", (x0, py1, 0.0), (x1 - x0, 0, 0), (0, y1 - py1, 0), walkable=True),
        quad(f"{prefix}/floor_w", (x0, py0, 0.0), (px0 - x0, 0, 0), (0, py1 - py0, 0), walkable=True),
        quad(f"{prefix}/floor_e", (px1, py0, 0.0), (x1 - px1, 0, 0), (0, py1 - py0, 0), walkable=True),
        quad(f"{prefix}/pit/bottom", (px0, py0, -depth), (px1 - px0, 0, 0), (0, py1 - py0, 0), walkable=True),
        quad(f"{prefix}/pit/-x", (px0, py0, 0.0), down, (0, py1 - py0, 0)),
        quad(f"{prefix}/pit/+x", (px1, py0, 0.0), (0, py1 - py0, 0), down),
        quad(f"{prefix}/pit/-y", (px0, py0, 0.0), (px1 - px0, 0, 0), down),
        quad(f"{prefix}/pit/+y", (px0, py1, 0.0), down, (px1 - px0, 0, 0)),
    ]


CORRIDOR_LENGTH = 30.0
SLOT_PITCH = 0.75
SLOT_WIDTH = 0.3
SLOT_DEPTH = 1.2


def _corridor() -> Scene:
    half = 0.5 * CORRIDOR_LENGTH
    surfaces = _room("corridor", (-half, half), (-1.0, 1.0), 2.5)
    centers = np.arange(-half + 1.5, half - 1.5 + 1e-9, SLOT_PITCH)
    surfaces += slotted_ceiling("corridor", (-half, half), (-1.0, 1.0), 2.5, centers, SLOT_WIDTH, SLOT_DEPTH)
    # line runs the corridor's length along its axis
    anchors = {
        "default": (0.0, 0.0, math.pi / 2.0),
        "oval": (0.0, 0.0, 0.0),
        "line": (1.0 - half, 0.0, 0.0),
    }
    return Scene("corridor", tuple(surfaces), anchors=anchors)


PIT_DEPTH = 0.27


def _tactical() -> Scene:
    surfaces = _room("tactical", (-5.0, 5.0), (-5.0, 5.0), 3.0, floor=False)
    surfaces += floor_with_pit("tactical", (-5.0, 5.0), (-5.0, 5.0), (1.0, 3.0), (0.55, 1.45), PIT_DEPTH)
    run = 2.0
    rise = run * math.tan(math.radians(RAMP_ANGLE_DEG))
    surfaces += ramp("tactical/ramp", (-3.0, -3.5, 0.0), 0.0, run, 1.5, RAMP_ANGLE_DEG)
    surfaces += box("tactical/platform", (-0.25, -3.5, 0.5 * rise), (1.5, 1.5, rise), walkable_top=True)
    surfaces += ramp("tactical/ramp_down", (2.5, -3.5, 0.0), math.pi, run, 1.5, RAMP_ANGLE_DEG)
    surfaces += box("tactical/barrier", (4.2, -3.0, 0.6), (0.4, 2.0, 1.2))
    surfaces += box("tactical/pillar", (-3.5, 3.0, 1.5), (0.6, 0.6, 3.0))
    # prone dummy lying along x in the pit, its back below floor level
    bottom = -PIT_DEPTH
    surfaces += box("dummy/torso", (2.2, 1.0, bottom + 0.1), (0.8, 0.45, 0.2))
    surfaces += box("dummy/legs", (1.5, 1.0, bottom + 0.08), (0.6, 0.35, 0.16))
    surfaces += box("dummy/head", (2.72, 1.0, bottom + 0.08), (0.2, 0.2, 0.16))
    anchors = {
        "default": (0.0, 0.0, 0.0),
        "line": (-4.0, -3.5, 0.0),
        "loop": (2.0, 1.0, 0.0),
    }
    return Scene("tactical", tuple(surfaces), anchors=anchors)


_BUILDERS = {"lab": _lab, "corridor": _corridor, "tactical": _tactical}


def build_scene(kind: str) -> Scene:
    """
    Build one of the test sites.

    Raises:
        UnknownKindError: if kind is not lab, corridor or tactical
    """
    if kind not in _BUILDERS:
        raise UnknownKindError("scene", kind, _BUILDERS)
    scene = _BUILDERS[kind]()
    logger.debug(f"Built scene '{kind}' with {len(scene.surfaces)} surfaces")
    return scene


def load_scene(path: Union[str, Path], kind: str = "custom") -> Scene:
    """
    Read a scene from a CSV primitive list.

    Columns: ``id, type, cx, cy, cz, sx, sy, sz, yaw_deg, walkable`` with type
    ``box`` (center/size), ``quad`` (horizontal rectangle centered at c with
    size sx x sy) or ``ramp`` (low-edge center c, run sx, width sy, angle sz).
    """
    try:
        table = pd.read_csv(path)
    except Exception as e:
        raise Exception(f"Error reading scene file {path}: {str(e)}") from e
    surfaces: List[Surface] = []
    for row in table.itertuples(index=False):
        yaw = math.radians(float(row.yaw_deg))
        center = (float(row.cx), float(row.cy), float(row.cz))
        walkable = str(row.walkable).strip().lower() in {"true", "1", "yes"}
        if row.type == "box":
            surfaces += box(str(row.id), center, (row.sx, row.sy, row.sz), yaw, walkable_top=walkable)
        elif row.type == "quad":
            r = rot_z(yaw)
            ex, ey = r[:, 0] * row.sx, r[:, 1] * row.sy
            surfaces.append(quad(str(row.id), np.asarray(center) - 0.5 * (ex + ey), ex, ey, walkable=walkable))
        elif row.type == "ramp":
            surfaces += ramp(str(row.id), center, yaw, float(row.sx), float(row.sy), float(row.sz))
        else:
            raise UnknownKindError("primitive", str(row.type), ("box", "quad", "ramp"))
    return Scene(kind, tuple(surfaces), anchors={"default": (0.0, 0.0, 0.0)})
