"""
Evaluation metrics for a simulated run.
"""
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import entropy

from ..environment import VoxelGrid
from ..exceptions import EmptyReferenceError, EmptySeriesError, ResolutionMismatchError
from ..sensors import ScanFrame

TRACKING_ERROR_DEFINITION = "time-indexed"
OUT_OF_SCOPE = ("power", "cost", "weight")


def completeness(reference: VoxelGrid, estimated: VoxelGrid) -> float:
    """
    Voxel recall ``|V_ref & V_est| / |V_ref|``.

    Raises:
        ResolutionMismatchError: if the grids use different resolutions
        EmptyReferenceError: if the reference grid is empty
    """
    if not math.isclose(reference.resolution, estimated.resolution, rel_tol=1e-12):
        raise ResolutionMismatchError(
            f"reference resolution {reference.resolution} != estimated resolution {estimated.resolution}")
    if len(reference) == 0:
        raise EmptyReferenceError("reference voxel grid is empty")
    return len(reference.occupied & estimated.occupied) / len(reference)


def target_recall(target: VoxelGrid, estimated: VoxelGrid) -> float:
    """Fraction of a target's reference voxels present in the estimated map."""
    return completeness(target, estimated)


def tracking_errors(times: Sequence[float], executed: np.ndarray,
                    reference: Union[Callable[[float], object], np.ndarray]) -> np.ndarray:
    """
    Per-sample planar distance from the executed position to the reference at the same time.

    Args:
        times: Sample times
        executed: (N, 2) or (N, 3) executed positions (only x, y are used)
        reference: Trajectory callable ``t -> state with .position`` or (N, 2) positions
    """
    executed = np.asarray(executed, dtype=float)
    if executed.ndim != 2 or len(executed) == 0:
        raise EmptySeriesError("no executed positions")
    if callable(reference):
        ref = np.array([reference(float(t)).position[:2] for t in times])
    else:
        ref = np.asarray(reference, dtype=float)[:, :2]
    if len(ref) != len(executed):
        raise ValueError(f"{len(executed)} executed samples but {len(ref)} reference samples")
    return np.linalg.norm(executed[:, :2] - ref, axis=1)


def mean_tracking_error(times: Sequence[float], executed: np.ndarray,
                        reference: Union[Callable[[float], object], np.ndarray]) -> float:
    """
    Mean time-indexed deviation from the reference.

    Raises:
        EmptySeriesError: with fewer than two samples
    """
    if len(times) < 2:
        raise EmptySeriesError(f"need at least 2 samples, got {len(times)}")
    return float(np.mean(tracking_errors(times, executed, reference)))


def lap_errors(times: Sequence[float], errors: Sequence[float], lap_time: float) -> List[float]:
    """Mean tracking error per lap (a trailing partial lap is included)."""
    times = np.asarray(times, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(times) == 0:
        return []
    if lap_time <= 0 or not np.isfinite(lap_time):
        return [float(errors.mean())]
    lap = np.floor((times - times[0]) / lap_time).astype(int)
    return [float(errors[lap == k].mean()) for k in np.unique(lap)]


def near_ground_fraction(points_world: np.ndarray, sensor_positions: Optional[np.ndarray] = None,
                         height: float = 0.3, radius: float = 3.0) -> float:
    """
    Share of all returns that are near-ground returns close to the sensor path.

    A return counts when its world z is below ``height`` and it lies within
    ``radius`` (horizontally) of some sensor position. With no positions
    given, every return is inside the radius band. An empty cloud gives 0.
    """
    points = np.asarray(points_world, dtype=float).reshape(-1, 3)
    if len(points) == 0:
        return 0.0
    low = points[:, 2] < height
    if sensor_positions is not None:
        path = np.asarray(sensor_positions, dtype=float).reshape(-1, 3)
        if len(path) == 0 or not np.any(low):
            return 0.0
        distance, _ = cKDTree(path[:, :2]).query(points[low, :2])
        close = np.zeros(len(points), dtype=bool)
        close[np.flatnonzero(low)] = distance <= radius
        low = close
    return float(np.count_nonzero(low) / len(points))


def elevation_angles(scans: Sequence[ScanFrame]) -> np.ndarray:
    """World-frame elevation (rad) of every return, measured from the sensor origin."""
    angles = []
    for scan in scans:
        if len(scan) == 0:
            continue
        rays = scan.true_pose.rotate(scan.points)
        angles.append(np.arctan2(rays[:, 2], np.hypot(rays[:, 0], rays[:, 1])))
    return np.concatenate(angles) if angles else np.zeros(0)


def elevation_entropy(scans: Sequence[ScanFrame], bins: int = 36) -> float:
    """Shannon entropy (bits) of the world elevation histogram over [-90, 90] degrees."""
    return histogram_entropy(elevation_angles(scans), bins)


def histogram_entropy(angles: np.ndarray, bins: int = 36) -> float:
    counts, _ = np.histogram(angles, bins=bins, range=(-math.pi / 2.0, math.pi / 2.0))
    if counts.sum() == 0:
        return 0.0
    return float(entropy(counts, base=2))


@dataclass
class RunReport:
    """Metrics of one repeat of one experiment."""
    scene: str
    trajectory: str
    mode: str
    control_mode: str
    repeat: int
    seed: int
    config_hash: str
    completeness: float
    mean_tracking_error: float
    near_ground_fraction: float
    elevation_entropy: float
    target_recall: float = float("nan")
    min_eigenvalue: float = float("nan")
    degenerate_frames: int = 0
    degraded_frames: int = 0
    frames: int = 0
    saturated_ticks: int = 0
    lap_errors: List[float] = field(default_factory=list)
    map_source: str = "true poses"
    tracking_error_definition: str = TRACKING_ERROR_DEFINITION

    def __post_init__(self):
        if not 0.0 <= self.completeness <= 1.0:
            raise ValueError(f"completeness must be in [0, 1], got {self.completeness}")
        if self.mean_tracking_error < 0:
            raise ValueError("mean_tracking_error must be >= 0")

    def to_row(self) -> Dict[str, object]:
        """Flat dictionary for CSV output; the lap series is joined with ';'."""
        row = asdict(self)
        row["lap_errors"] = ";".join(f"{e:.6f}" for e in self.lap_errors)
        return row

    def summary(self) -> str:
        """Human-readable summary (no wall-clock values, so reruns compare equal)."""
        lines = [
            f"scene: {self.scene}",
            f"trajectory: {self.trajectory}",
            f"mode: {self.mode}",
            f"control: {self.control_mode}",
            f"repeat: {self.repeat} (seed {self.seed})",
            f"config hash: {self.config_hash}",
            f"map built from: {self.map_source}",
            "",
            f"completeness: {self.completeness:.4f}",
            f"mean tracking error ({self.tracking_error_definition}): {self.mean_tracking_error:.4f} m",
            f"near-ground fraction: {self.near_ground_fraction:.4f}",
            f"elevation entropy: {self.elevation_entropy:.4f} bits",
        ]
        if not math.isnan(self.target_recall):
            lines.append(f"target recall: {self.target_recall:.4f}")
        if not math.isnan(self.min_eigenvalue):
            lines.append(f"median min registration eigenvalue: {self.min_eigenvalue:.4g}")
        lines += [
            f"frames: {self.frames} (degenerate {self.degenerate_frames}, degraded {self.degraded_frames})",
            f"saturated control ticks: {self.saturated_ticks}",
            "lap errors: " + ", ".join(f"{e:.4f}" for e in self.lap_errors),
            "",
            "not evaluated (out of scope): " + ", ".join(OUT_OF_SCOPE),
        ]
        return "\n".join(lines) + "\n"
