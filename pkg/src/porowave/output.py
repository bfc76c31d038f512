"""Snapshot, report, and figure writers.

Snapshots go out as legacy ASCII VTK structured grids carrying all 13
state components plus the derived energy density and the per-cell
material id, or as a CSV of one cell-centroid plane.  Convergence and
limiter-study results land in report.csv (columns case, N, norm,
value, rate) with a log-log error plot rendered alongside.
"""

from __future__ import annotations

import csv
import os

import numpy as np

from porowave.grid import MappedGrid
from porowave.solver import StateField, energy_density
from porowave.state import COMPONENT_NAMES

_FLOAT_FMT = "%.9g"

# Volume weighting of the 1-norm is an implementation choice worth
# surfacing wherever the numbers land, hence the report comment line.
_REPORT_NOTE = ("# norms: volume-weighted relative 1-norm and relative "
                "max-norm, all 13 components stacked, vs the analytic "
                "solution at final time; per-component norms follow the "
                "same convention")


def write_snapshot(state: StateField, grid: MappedGrid, path,
                   format: str = "vtk", slice_axis: int = 2,
                   slice_index: int | None = None) -> str:
    """Writes one snapshot file and returns its path.

    format "vtk" writes the interior cells as a legacy ASCII
    structured grid; "csv-slice" writes one plane of cell-centroid
    values (slice_axis, slice_index in interior indices; the index
    defaults to the middle layer).
    """
    path = os.fspath(path)
    if format == "vtk":
        _write_vtk(state, grid, path)
    elif format == "csv-slice":
        if slice_axis not in (0, 1, 2):
            raise ValueError(f"slice axis must be 0, 1, or 2, "
                             f"got {slice_axis}")
        if slice_index is None:
            slice_index = grid.dims[slice_axis] // 2
        _write_csv_slice(state, grid, path, slice_axis, slice_index)
    else:
        raise ValueError(f"unknown snapshot format {format!r}; "
                         "expected 'vtk' or 'csv-slice'")
    return path


def snapshot_path(out_dir, step: int) -> str:
    return os.path.join(os.fspath(out_dir), f"snap_{step}.vtk")


def write_snapshots(grid: MappedGrid, state: StateField, out_dir,
                    step: int, formats=("vtk",), slice_axis: int = 2,
                    slice_index: int | None = None) -> list[str]:
    """Writes the configured formats for one step under out_dir."""
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt == "vtk":
            p = snapshot_path(out_dir, step)
        elif fmt == "csv-slice":
            p = os.path.join(out_dir, f"slice_{step}.csv")
        else:
            raise ValueError(f"unknown snapshot format {fmt!r}")
        written.append(write_snapshot(state, grid, p, format=fmt,
                                      slice_axis=slice_axis,
                                      slice_index=slice_index))
    return written


def _cell_fields(state: StateField, grid: MappedGrid):
    """Interior cell arrays: (Q, energy, material id)."""
    sl = grid.interior()
    return state.Q[sl], energy_density(grid, state), grid.material_id[sl]


def _write_vtk(state: StateField, grid: MappedGrid, path: str) -> None:
    g = grid.ghost
    n1, n2, n3 = grid.dims
    verts = grid.vertices[g:g + n1 + 1, g:g + n2 + 1, g:g + n3 + 1]
    Q, energy, mat_id = _cell_fields(state, grid)
    ncells = n1 * n2 * n3

    def flat(a):
        # VTK expects the first index varying fastest.
        return a.reshape(-1, order="F")

    try:
        with open(path, "w") as fh:
            fh.write("# vtk DataFile Version 3.0\n")
            fh.write(f"wave state at t = {state.t:.9g} s\n")
            fh.write("ASCII\nDATASET STRUCTURED_GRID\n")
            fh.write(f"DIMENSIONS {n1 + 1} {n2 + 1} {n3 + 1}\n")
            npts = (n1 + 1) * (n2 + 1) * (n3 + 1)
            fh.write(f"POINTS {npts} double\n")
            pts = np.stack([flat(verts[..., c]) for c in range(3)], axis=-1)
            np.savetxt(fh, pts, fmt=_FLOAT_FMT)
            fh.write(f"CELL_DATA {ncells}\n")
            for c, name in enumerate(COMPONENT_NAMES):
                fh.write(f"SCALARS {name} double\nLOOKUP_TABLE default\n")
                np.savetxt(fh, flat(Q[..., c]), fmt=_FLOAT_FMT)
            fh.write("SCALARS energy double\nLOOKUP_TABLE default\n")
            np.savetxt(fh, flat(energy), fmt=_FLOAT_FMT)
            fh.write("SCALARS material_id int\nLOOKUP_TABLE default\n")
            np.savetxt(fh, flat(mat_id), fmt="%d")
    except OSError as exc:
        raise OSError(f"failed to write snapshot {path}: {exc}") from exc


def _write_csv_slice(state: StateField, grid: MappedGrid, path: str,
                     axis: int, index: int) -> None:
    if axis not in (0, 1, 2):
        raise ValueError(f"slice axis must be 0, 1, or 2, got {axis}")
    if not 0 <= index < grid.dims[axis]:
        raise ValueError(f"slice index {index} outside 0.."
                         f"{grid.dims[axis] - 1} along axis {axis}")
    sl = grid.interior()
    Q, energy, mat_id = _cell_fields(state, grid)
    centroid = grid.centroid[sl]

    take = [slice(None)] * 3
    take[axis] = index
    take = tuple(take)
    xyz = centroid[take].reshape(-1, 3)
    vals = Q[take].reshape(-1, len(COMPONENT_NAMES))
    e = energy[take].reshape(-1, 1)
    m = mat_id[take].reshape(-1, 1).astype(float)

    header = ",".join(["x", "y", "z", *COMPONENT_NAMES,
                       "energy", "material_id"])
    data = np.concatenate([xyz, vals, e, m], axis=1)
    fmt = [_FLOAT_FMT] * (data.shape[1] - 1) + ["%d"]
    try:
        np.savetxt(path, data, fmt=fmt, delimiter=",", header=header,
                   comments="")
    except OSError as exc:
        raise OSError(f"failed to write slice {path}: {exc}") from exc


# -----------------------------------------------------------------------------
# Error reports
# -----------------------------------------------------------------------------

def write_report(path, reports) -> str:
    """Writes ErrorReports to CSV (columns case, N, norm, value, rate)."""
    path = os.fspath(path)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(_REPORT_NOTE + "\n")
        writer = csv.writer(fh)
        writer.writerow(["case", "N", "norm", "value", "rate"])
        for report in reports:
            for case, N, norm, value, rate in report.rows():
                writer.writerow([
                    case, N, norm, _FLOAT_FMT % value,
                    "" if rate is None else "%.4f" % rate,
                ])
    return path


def read_report(path) -> list[dict]:
    """Rows of a report.csv as dicts with typed N/value/rate fields."""
    rows = []
    with open(os.fspath(path), newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    if not lines:
        raise ValueError(f"report {path} is empty")
    for i, row in enumerate(csv.DictReader(lines)):
        if row.get("value") is None or row.get("N") is None:
            raise ValueError(f"report {path}: row {i + 2} is malformed")
        try:
            rows.append({
                "case": row["case"],
                "N": int(row["N"]),
                "norm": row["norm"],
                "value": float(row["value"]),
                "rate": float(row["rate"]) if row.get("rate") else None,
            })
        except (TypeError, ValueError, KeyError) as exc:
            raise ValueError(
                f"report {path}: row {i + 2} is malformed: {exc}") from exc
    return rows


def plot_report(report_path, out_path) -> str | None:
    """Log-log error-vs-N plot of the stacked norms in a report.csv.

    One line per (case, norm) series with at least two resolutions;
    series with fewer points are skipped.  Returns the image path, or
    None when nothing was plottable.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = read_report(report_path)
    series: dict[tuple, list[tuple[int, float]]] = {}
    for row in rows:
        if row["norm"] not in ("1-norm", "max-norm"):
            continue
        series.setdefault((row["case"], row["norm"]), []).append(
            (row["N"], row["value"]))

    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    plotted = 0
    anchor = None
    for (case, norm), pts in sorted(series.items(), key=lambda kv: str(kv[0])):
        pts = sorted(pts)
        N = np.array([p[0] for p in pts], dtype=float)
        v = np.array([p[1] for p in pts], dtype=float)
        marker = "o" if norm == "1-norm" else "s"
        if len(pts) >= 2:
            slope = np.polyfit(np.log(N), np.log(v), 1)[0]
            ax.loglog(N, v, marker + ("-" if norm == "1-norm" else "--"),
                      label=f"case {case} {norm} (rate {-slope:.2f})")
            if anchor is None:
                anchor = (N, v)
        else:
            ax.loglog(N, v, marker, label=f"case {case} {norm}")
        plotted += 1
    if plotted == 0:
        plt.close(fig)
        return None

    if anchor is not None:
        N0, v0 = anchor
        ref = v0[0] * (N0 / N0[0]) ** -2.0
        ax.loglog(N0, ref, "k:", linewidth=1.0, label="second order")
    ax.set_xlabel("cells per edge N")
    ax.set_ylabel("relative error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    out_path = os.fspath(out_path)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
