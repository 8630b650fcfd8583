"""
Run evaluation metrics
"""

from .metrics import (
    OUT_OF_SCOPE,
    TRACKING_ERROR_DEFINITION,
    RunReport,
    completeness,
    elevation_angles,
    elevation_entropy,
    histogram_entropy,
    lap_errors,
    mean_tracking_error,
    near_ground_fraction,
    target_recall,
    tracking_errors,
)

__all__ = [
    'OUT_OF_SCOPE', 'TRACKING_ERROR_DEFINITION', 'RunReport', 'completeness', 'elevation_angles',
    'elevation_entropy', 'histogram_entropy', 'lap_errors', 'mean_tracking_error',
    'near_ground_fraction', 'target_recall', 'tracking_errors',
]
