"""
Experiment orchestration for the spherical robot simulator
"""

from .comparison_processor import ComparisonProcessor, compare, read_reports, report_from_row
from .experiment_processor import ExperimentProcessor, RunRecord, make_scene, mount_at, run_experiment

__all__ = [
    'ComparisonProcessor', 'compare', 'read_reports', 'report_from_row',
    'ExperimentProcessor', 'RunRecord', 'make_scene', 'mount_at', 'run_experiment',
]
