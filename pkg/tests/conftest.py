"""
Shared fixtures for the simulator tests.
"""
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.config import ExperimentConfig  # noqa: E402
from src.environment import Scene, build_scene, quad  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def short_config(tmp_path):
    """Small, fast configuration writing into a temporary directory."""
    config = ExperimentConfig()
    config.duration = 1.0
    config.repeats = 1
    config.lidar.rays_per_frame = 300
    config.output_dir = tmp_path / "output"
    config.log_dir = tmp_path / "logs"
    return config


@pytest.fixture
def corridor():
    return build_scene("corridor")


@pytest.fixture
def floor_and_walls():
    """Large floor with two facing walls 4 m away; used for pitch-down checks."""
    return Scene("floor_and_walls", (
        quad("floor", (-20.0, -20.0, 0.0), (40.0, 0.0, 0.0), (0.0, 40.0, 0.0), walkable=True),
        quad("wall_+x", (4.0, -20.0, 0.0), (0.0, 40.0, 0.0), (0.0, 0.0, 3.0)),
        quad("wall_-x", (-4.0, -20.0, 0.0), (0.0, 0.0, 3.0), (0.0, 40.0, 0.0)),
    ))


@pytest.fixture
def corner_scene():
    """Floor plus two perpendicular walls; walls are raised and kept apart so no voxel mixes two planes."""
    return Scene("corner", (
        quad("floor", (0.0, 0.0, 0.0), (6.0, 0.0, 0.0), (0.0, 6.0, 0.0), walkable=True),
        quad("wall_x0", (0.0, 1.0, 0.5), (0.0, 0.0, 2.5), (0.0, 5.0, 0.0)),
        quad("wall_y0", (1.0, 0.0, 0.5), (5.0, 0.0, 0.0), (0.0, 0.0, 2.5)),
    ))


@pytest.fixture
def long_corridor():
    """Floor and two raised parallel walls with no end walls: translation along x is unconstrained."""
    return Scene("long_corridor", (
        quad("floor", (-200.0, -1.0, 0.0), (400.0, 0.0, 0.0), (0.0, 2.0, 0.0), walkable=True),
        quad("wall_-y", (-200.0, -1.0, 0.5), (400.0, 0.0, 0.0), (0.0, 0.0, 2.0)),
        quad("wall_+y", (-200.0, 1.0, 0.5), (0.0, 0.0, 2.0), (400.0, 0.0, 0.0)),
    ))
