"""
Voxel grids for map completeness.

Voxel ``k`` along an axis covers ``[(k - 0.5) res, (k + 0.5) res)``, so
surfaces at integer multiples of the resolution sit at voxel centers.
"""
from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, Tuple

import numpy as np

VoxelIndex = Tuple[int, int, int]


@dataclass(frozen=True)
class VoxelGrid:
    """Set of occupied voxel indices at a fixed resolution."""
    resolution: float
    occupied: FrozenSet[VoxelIndex] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be > 0")
        object.__setattr__(self, "occupied", frozenset(self.occupied))

    def __len__(self) -> int:
        return len(self.occupied)

    def __contains__(self, index) -> bool:
        return tuple(index) in self.occupied

    def centers(self) -> np.ndarray:
        """Voxel center coordinates, sorted for deterministic output."""
        if not self.occupied:
            return np.zeros((0, 3))
        return np.array(sorted(self.occupied), dtype=float) * self.resolution


def voxel_indices(points: np.ndarray, resolution: float) -> np.ndarray:
    """Integer voxel indices (N, 3) of a point array."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    return np.floor(points / resolution + 0.5).astype(np.int64)


def voxelize(points: np.ndarray, resolution: float) -> VoxelGrid:
    """Occupied voxels of a point array."""
    indices = np.unique(voxel_indices(points, resolution), axis=0)
    return VoxelGrid(resolution, frozenset(map(tuple, indices.tolist())))


def grid_from_indices(indices: Iterable[VoxelIndex], resolution: float) -> VoxelGrid:
    return VoxelGrid(resolution, frozenset(tuple(int(i) for i in idx) for idx in indices))
