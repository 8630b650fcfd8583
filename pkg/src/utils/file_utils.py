"""
File utility functions for the spherical robot simulator.
"""
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import pandas as pd
from openpyxl.utils import get_column_letter
from scipy.spatial.transform import Rotation

from ..sensors import ImuSample

TRAJECTORY_COLUMNS = ["t", "ref_x", "ref_y", "true_x", "true_y", "est_x", "est_y", "err_m"]
IMU_COLUMNS = ["t", "gx", "gy", "gz", "ax", "ay", "az"]
ESTIMATE_COLUMNS = ["t", "px", "py", "pz", "qw", "qx", "qy", "qz"]


def create_directory(directory: Union[str, Path]) -> Path:
    """
    Create a directory if it doesn't exist.

    Args:
        directory: Path to the directory to create

    Returns:
        Path: The path to the created directory
    """
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_ply(points: np.ndarray, file_path: Union[str, Path]) -> Path:
    """
    Write points as an ASCII PLY file with float x, y, z vertices.

    Args:
        points: (N, 3) array
        file_path: Destination file

    Returns:
        Path: The written file
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    path = Path(file_path)
    header = "\n".join([
        "ply",
        "format ascii 1.0",
        f"element vertex {len(points)}",
        "property float x",
        "property float y",
        "property float z",
        "end_header",
    ])
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(header + "\n")
            np.savetxt(f, points, fmt="%.6f")
    except OSError as e:
        raise OSError(f"Error writing PLY file {path}: {e}") from e
    return path


def read_ply(file_path: Union[str, Path]) -> np.ndarray:
    """Read the vertices of an ASCII PLY file written by :func:`write_ply`."""
    path = Path(file_path)
    with open(path, encoding="utf-8") as f:
        count = 0
        for line in f:
            if line.startswith("element vertex"):
                count = int(line.split()[-1])
            if line.strip() == "end_header":
                break
        if count == 0:
            return np.zeros((0, 3))
        return np.loadtxt(f, dtype=float, ndmin=2)[:count]


def save_to_csv(df: pd.DataFrame, file_path: Union[str, Path], float_format: str = "%.6f") -> Path:
    """
    Save a DataFrame to CSV with a fixed float format.

    Args:
        df: DataFrame to save
        file_path: Destination file
        float_format: printf-style float format

    Returns:
        Path: The written file
    """
    path = Path(file_path)
    try:
        df.to_csv(path, index=False, float_format=float_format, lineterminator="\n")
    except Exception as e:
        raise Exception(f"Error saving CSV file {path}: {str(e)}") from e
    return path


def save_to_excel(df: pd.DataFrame, file_path: Union[str, Path], sheet_name: str = "Comparison") -> Path:
    """
    Save a DataFrame to an Excel file with readable column widths.

    Args:
        df: DataFrame to save
        file_path: Path where to save the Excel file
        sheet_name: Name of the sheet

    Returns:
        Path: The written file
    """
    path = Path(file_path)
    try:
        with pd.ExcelWriter(path, engine="openpyxl") as writer:
            df.to_excel(writer, index=False, sheet_name=sheet_name)
            worksheet = writer.sheets[sheet_name]
            for idx, col in enumerate(df.columns):
                values = df[col].astype(str).apply(len)
                max_length = max(values.max() if len(values) else 0, len(str(col)))
                worksheet.column_dimensions[get_column_letter(idx + 1)].width = min(max_length + 2, 50)
    except Exception as e:
        raise Exception(f"Error saving to Excel file {path}: {str(e)}") from e
    return path


def imu_frame(samples: Sequence[ImuSample]) -> pd.DataFrame:
    """IMU log table (t, gx, gy, gz, ax, ay, az)."""
    rows = [[s.timestamp, *s.gyro, *s.accel] for s in samples]
    return pd.DataFrame(rows, columns=IMU_COLUMNS)


def estimate_frame(times: Sequence[float], positions: np.ndarray, rotations: np.ndarray) -> pd.DataFrame:
    """Estimated trajectory table (t, px, py, pz, qw, qx, qy, qz)."""
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    if len(positions) == 0:
        return pd.DataFrame(columns=ESTIMATE_COLUMNS)
    xyzw = Rotation.from_matrix(np.asarray(rotations, dtype=float).reshape(-1, 3, 3)).as_quat()
    data = np.column_stack([np.asarray(times, dtype=float), positions, xyzw[:, 3], xyzw[:, :3]])
    return pd.DataFrame(data, columns=ESTIMATE_COLUMNS)
