"""
Comparison of baseline modes and one-parameter sweeps.
"""
import logging
import math
from dataclasses import fields, replace
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np
import pandas as pd

from ..config import BASELINE_MODES, ExperimentConfig, apply_overrides
from ..exceptions import EmptySeriesError, MismatchedScenesError, RunError
from ..metrics import RunReport
from ..utils import create_directory, save_to_csv, save_to_excel
from .experiment_processor import run_experiment

METRIC_COLUMNS = [
    "completeness",
    "mean_tracking_error",
    "near_ground_fraction",
    "elevation_entropy",
    "target_recall",
    "min_eigenvalue",
]


def compare(reports: Sequence[RunReport]) -> pd.DataFrame:
    """
    Per-mode mean and spread (population standard deviation) of every metric.

    Rows are ordered by mean completeness, highest first.

    Raises:
        EmptySeriesError: with fewer than two reports
        MismatchedScenesError: if the reports do not share scene and trajectory
    """
    if len(reports) < 2:
        raise EmptySeriesError(f"need at least 2 reports to compare, got {len(reports)}")
    setups = {(r.scene, r.trajectory) for r in reports}
    if len(setups) > 1:
        raise MismatchedScenesError(
            "reports cover different scene/trajectory pairs: " + ", ".join(f"{s}/{t}" for s, t in sorted(setups)))

    df = pd.DataFrame([r.to_row() for r in reports])
    rows = []
    for (mode, control_mode), group in df.groupby(["mode", "control_mode"], sort=False):
        row: Dict[str, object] = {"mode": mode, "control_mode": control_mode, "repeats": len(group)}
        for col in METRIC_COLUMNS:
            values = group[col].astype(float).to_numpy()
            finite = values[np.isfinite(values)]
            row[f"{col}_mean"] = float(finite.mean()) if len(finite) else math.nan
            row[f"{col}_spread"] = float(finite.std(ddof=0)) if len(finite) else math.nan
        rows.append(row)
    table = pd.DataFrame(rows)
    return table.sort_values("completeness_mean", ascending=False, kind="mergesort").reset_index(drop=True)


def read_reports(directory: Union[str, Path]) -> List[RunReport]:
    """Load every ``report.csv`` below a directory, in sorted path order."""
    reports = []
    for path in sorted(Path(directory).rglob("report.csv")):
        row = pd.read_csv(path, keep_default_na=False).iloc[0].to_dict()
        reports.append(report_from_row(row))
    return reports


def report_from_row(row: Dict[str, object]) -> RunReport:
    """Inverse of :meth:`RunReport.to_row`."""
    values = {}
    for f in fields(RunReport):
        raw = row[f.name]
        if f.name == "lap_errors":
            values[f.name] = [float(x) for x in str(raw).split(";") if x]
        elif f.type in (int, "int"):
            values[f.name] = int(raw)
        elif f.type in (float, "float"):
            values[f.name] = float(raw) if raw != "" else math.nan
        else:
            values[f.name] = str(raw)
    return RunReport(**values)


class ComparisonProcessor:
    """Runs every baseline mode on one setup and tabulates the results."""

    def __init__(self, config: ExperimentConfig):
        """
        Initialize the ComparisonProcessor.

        Args:
            config: Base configuration; its mode is replaced per baseline
        """
        self.config = config
        self.logger = logging.getLogger(__name__)

    def run_modes(self, modes: Sequence[str] = BASELINE_MODES, write: bool = True) -> List[RunReport]:
        reports: List[RunReport] = []
        for mode in modes:
            self.logger.info(f"Running baseline '{mode}'")
            reports += run_experiment(replace(self.config, mode=mode), write)
        return reports

    def write_table(self, table: pd.DataFrame, name: str = "comparison") -> Path:
        """Write the table as CSV and as an Excel workbook."""
        out_dir = create_directory(self.config.output_dir)
        csv_path = save_to_csv(table, out_dir / f"{name}.csv")
        save_to_excel(table, out_dir / f"{name}.xlsx", sheet_name=name.capitalize())
        self.logger.info(f"Comparison written to {csv_path}")
        return csv_path

    def compare_modes(self, modes: Sequence[str] = BASELINE_MODES) -> pd.DataFrame:
        try:
            table = compare(self.run_modes(modes))
            self.write_table(table)
            return table
        except RunError:
            raise
        except Exception as e:
            error_msg = f"Comparison failed: {str(e)}"
            self.logger.exception(error_msg)
            raise RunError(error_msg, {"scene": self.config.scene}) from e

    def sweep(self, key: str, values: Sequence[str]) -> pd.DataFrame:
        """
        Run the configuration once per value of a dotted config key.

        Args:
            key: Dotted key, e.g. ``control.oscillation_amplitude``
            values: Raw values, parsed like config-file values

        Returns:
            One row per value with the mean of every metric over the repeats
        """
        rows = []
        for value in values:
            config = replace(self.config, output_dir=self.config.output_dir / f"{key}={value}")
            # nested sections are shared by replace(); copy them before overriding
            for section in ("vehicle", "lidar", "imu", "control", "estimator", "metrics"):
                setattr(config, section, replace(getattr(self.config, section)))
            apply_overrides(config, {key: str(value)})
            config.validate()
            self.logger.info(f"Sweep {key}={value}")
            reports = run_experiment(config)
            row: Dict[str, object] = {"key": key, "value": value, "repeats": len(reports)}
            for col in METRIC_COLUMNS:
                samples = np.array([getattr(r, col) for r in reports], dtype=float)
                samples = samples[np.isfinite(samples)]
                row[f"{col}_mean"] = float(samples.mean()) if len(samples) else math.nan
            rows.append(row)
        table = pd.DataFrame(rows)
        self.write_table(table, name="sweep")
        return table
