"""
Voxel-hashed local map with incremental plane fits.

Each voxel keeps the point count and first and second moments, so a plane
fit is an eigen-decomposition of the 3x3 scatter and inserting points in any
order gives the same fit. Voxels live in arrays sorted by packed key; an
insert touches only the voxels the new points fall in.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from ..environment import voxel_indices
from ..geometry import RigidTransform
from ..sensors import ScanFrame

_KEY_BITS = 21
_KEY_OFFSET = 1 << (_KEY_BITS - 1)
_KEY_MASK = (1 << _KEY_BITS) - 1


def pack_keys(indices: np.ndarray) -> np.ndarray:
    """Pack (N, 3) voxel indices into int64 keys."""
    shifted = (np.asarray(indices, dtype=np.int64) + _KEY_OFFSET) & _KEY_MASK
    return (shifted[:, 0] << (2 * _KEY_BITS)) | (shifted[:, 1] << _KEY_BITS) | shifted[:, 2]


@dataclass(frozen=True)
class PlaneFit:
    normal: np.ndarray
    centroid: np.ndarray
    flatness: float
    count: int


def fit_planes(counts: np.ndarray, totals: np.ndarray, outers: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched :func:`fit_plane` over (N,), (N, 3) and (N, 3, 3) moments."""
    counts = np.asarray(counts, dtype=float).reshape(-1)
    centroids = np.asarray(totals, dtype=float).reshape(-1, 3) / counts[:, None]
    scatter = np.asarray(outers, dtype=float).reshape(-1, 3, 3) / counts[:, None, None]
    scatter = scatter - centroids[:, :, None] * centroids[:, None, :]
    eigenvalues, eigenvectors = np.linalg.eigh(0.5 * (scatter + np.swapaxes(scatter, 1, 2)))
    normals = eigenvectors[:, :, 0]
    normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
    dominant = normals[np.arange(len(normals)), np.argmax(np.abs(normals), axis=1)]
    normals = np.where(dominant[:, None] < 0, -normals, normals)
    largest = np.maximum(eigenvalues[:, 2], 0.0)
    smallest = np.maximum(eigenvalues[:, 0], 0.0)
    flatness = np.where(largest > 0, smallest / np.where(largest > 0, largest, 1.0), 1.0)
    return normals, centroids, flatness


def fit_plane(count: int, total: np.ndarray, outer: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Plane through accumulated moments.

    Returns:
        (unit normal, centroid, flatness) where flatness is the ratio of the
        smallest to the largest scatter eigenvalue; the normal's largest
        component is made positive
    """
    normals, centroids, flatness = fit_planes(np.array([count]), total, outer)
    return normals[0], centroids[0], float(flatness[0])


class LocalMap:
    """
    Voxel map exposing a plane per sufficiently flat voxel.

    Args:
        voxel_size: Edge length of the map voxels in meters
        min_points: Minimum points before a voxel is fitted
        planarity_ratio: A voxel exposes its plane when flatness < this ratio
    """

    def __init__(self, voxel_size: float = 0.5, min_points: int = 6, planarity_ratio: float = 0.1):
        if voxel_size <= 0:
            raise ValueError("voxel_size must be > 0")
        self.voxel_size = voxel_size
        self.min_points = min_points
        self.planarity_ratio = planarity_ratio
        self._keys = np.zeros(0, dtype=np.int64)
        self._count = np.zeros(0, dtype=np.int64)
        self._total = np.zeros((0, 3))
        self._outer = np.zeros((0, 3, 3))
        self._normal = np.zeros((0, 3))
        self._centroid = np.zeros((0, 3))
        self._flatness = np.ones(0)
        self._planar = np.zeros(0, dtype=bool)
        self.logger = logging.getLogger(__name__)

    def __len__(self) -> int:
        return len(self._keys)

    @property
    def point_count(self) -> int:
        return int(self._count.sum())

    @property
    def plane_count(self) -> int:
        return int(self._planar.sum())

    def is_empty(self) -> bool:
        return len(self._keys) == 0

    def planes(self) -> Dict[int, PlaneFit]:
        return {int(self._keys[i]): PlaneFit(self._normal[i].copy(), self._centroid[i].copy(),
                                             float(self._flatness[i]), int(self._count[i]))
                for i in np.flatnonzero(self._planar)}

    def _add_voxels(self, keys: np.ndarray) -> None:
        n = len(keys)
        self._keys = np.concatenate([self._keys, keys])
        self._count = np.concatenate([self._count, np.zeros(n, dtype=np.int64)])
        self._total = np.concatenate([self._total, np.zeros((n, 3))])
        self._outer = np.concatenate([self._outer, np.zeros((n, 3, 3))])
        self._normal = np.concatenate([self._normal, np.zeros((n, 3))])
        self._centroid = np.concatenate([self._centroid, np.zeros((n, 3))])
        self._flatness = np.concatenate([self._flatness, np.ones(n)])
        self._planar = np.concatenate([self._planar, np.zeros(n, dtype=bool)])
        order = np.argsort(self._keys, kind="stable")
        for name in ("_keys", "_count", "_total", "_outer", "_normal", "_centroid", "_flatness", "_planar"):
            setattr(self, name, getattr(self, name)[order])

    def insert(self, points_world: np.ndarray) -> "LocalMap":
        """Accumulate world points and refit the touched voxels."""
        points = np.asarray(points_world, dtype=float).reshape(-1, 3)
        if len(points) == 0:
            return self
        keys = pack_keys(voxel_indices(points, self.voxel_size))
        unique, inverse = np.unique(keys, return_inverse=True)
        inverse = inverse.reshape(-1)
        counts = np.bincount(inverse, minlength=len(unique))
        totals = np.zeros((len(unique), 3))
        np.add.at(totals, inverse, points)
        outers = np.zeros((len(unique), 3, 3))
        np.add.at(outers, inverse, points[:, :, None] * points[:, None, :])

        known = np.zeros(len(unique), dtype=bool)
        if len(self._keys):
            pos = np.minimum(np.searchsorted(self._keys, unique), len(self._keys) - 1)
            known = self._keys[pos] == unique
        if not np.all(known):
            self._add_voxels(unique[~known])
        slots = np.searchsorted(self._keys, unique)
        self._count[slots] += counts
        self._total[slots] += totals
        self._outer[slots] += outers

        fitted = slots[self._count[slots] >= self.min_points]
        if len(fitted):
            normals, centroids, flatness = fit_planes(self._count[fitted], self._total[fitted], self._outer[fitted])
            self._normal[fitted] = normals
            self._centroid[fitted] = centroids
            self._flatness[fitted] = flatness
            self._planar[fitted] = flatness < self.planarity_ratio
        return self

    def find_planes(self, points_world: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Plane of each point's voxel.

        Returns:
            (mask, normals, centroids): mask selects points whose voxel exposes
            a plane; normals and centroids are given for the selected points
        """
        points = np.asarray(points_world, dtype=float).reshape(-1, 3)
        if len(points) == 0 or not np.any(self._planar):
            return np.zeros(len(points), dtype=bool), np.empty((0, 3)), np.empty((0, 3))
        query = pack_keys(voxel_indices(points, self.voxel_size))
        pos = np.clip(np.searchsorted(self._keys, query), 0, len(self._keys) - 1)
        mask = (self._keys[pos] == query) & self._planar[pos]
        return mask, self._normal[pos[mask]], self._centroid[pos[mask]]


def map_insert(scan: ScanFrame, pose: RigidTransform, local_map: LocalMap) -> LocalMap:
    """Insert a scan taken at LiDAR pose ``pose`` (T_WL) into the map."""
    if len(scan) == 0:
        return local_map
    return local_map.insert(pose.apply(scan.points))
