"""
Synthetic test sites, ray casting and reference voxelization
"""

from .scene import (
    CORRIDOR_LENGTH,
    PIT_DEPTH,
    RAMP_ANGLE_DEG,
    Scene,
    Surface,
    box,
    build_scene,
    floor_with_pit,
    load_scene,
    quad,
    ramp,
    raycast,
    reference_voxels,
    slotted_ceiling,
)
from .voxels import VoxelGrid, grid_from_indices, voxel_indices, voxelize

__all__ = [
    'CORRIDOR_LENGTH', 'PIT_DEPTH', 'RAMP_ANGLE_DEG', 'Scene', 'Surface', 'box', 'build_scene',
    'floor_with_pit', 'load_scene', 'quad', 'ramp', 'raycast', 'reference_voxels', 'slotted_ceiling',
    'VoxelGrid', 'grid_from_indices', 'voxel_indices', 'voxelize',
]
