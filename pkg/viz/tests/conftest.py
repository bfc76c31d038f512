"""Writers for hand-built snapshot and report files.

The synthetic snapshot grid is 2x2x1 cells (3x3x2 vertices) with vertex
coordinates x in {0,1,2}, y in {0,2,4}, z in {0,3} unless a test passes
its own point function.
"""

from __future__ import annotations

import numpy as np
import pytest

POINT_X = (0.0, 1.0, 2.0)
POINT_Y = (0.0, 2.0, 4.0)
POINT_Z = (0.0, 3.0)
CELL_DIMS = (2, 2, 1)


def _default_points(i: int, j: int, k: int) -> tuple[float, float, float]:
    return POINT_X[i], POINT_Y[j], POINT_Z[k]


def vtk_text(fields, title="wave state at t = 1e-05 s",
             points_fn=_default_points) -> str:
    """ASCII VTK text for the small structured grid with the given fields."""
    nx, ny, nz = len(POINT_X), len(POINT_Y), len(POINT_Z)
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_GRID",
        f"DIMENSIONS {nx} {ny} {nz}",
        f"POINTS {nx * ny * nz} double",
    ]
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                x, y, z = points_fn(i, j, k)
                lines.append(f"{x:.9g} {y:.9g} {z:.9g}")
    ncells = CELL_DIMS[0] * CELL_DIMS[1] * CELL_DIMS[2]
    lines.append(f"CELL_DATA {ncells}")
    for name, arr in fields.items():
        arr = np.asarray(arr, dtype=float).reshape(CELL_DIMS)
        lines.append(f"SCALARS {name} double")
        lines.append("LOOKUP_TABLE default")
        lines.extend(f"{v:.9g}" for v in arr.reshape(-1, order="F"))
    return "\n".join(lines) + "\n"


@pytest.fixture
def write_snapshot(tmp_path):
    """Writes vtk_text(fields, **kwargs) to disk and returns the path."""
    def _write(fields, name="snap_0.vtk", **kwargs):
        path = tmp_path / name
        path.write_text(vtk_text(fields, **kwargs))
        return path
    return _write


@pytest.fixture
def write_report(tmp_path):
    """Writes raw report text to disk and returns the path."""
    def _write(text, name="report.csv"):
        path = tmp_path / name
        path.write_text(text)
        return path
    return _write
