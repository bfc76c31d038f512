"""Tests for snapshot, report, and plot writers."""

import numpy as np
import pytest

from porowave.grid import UniformPartition, build_grid, scaled_box_mapping
from porowave.harness import ErrorReport, build_case, error_norms
from porowave.materials import BRINE, SANDSTONE, MaterialSpec
from porowave.output import (
    plot_report,
    read_report,
    snapshot_path,
    write_report,
    write_snapshot,
    write_snapshots,
)
from porowave.solver import state_from_solution, uniform_state
from porowave.state import COMPONENT_NAMES


@pytest.fixture(scope="module")
def small_grid():
    mapping = scaled_box_mapping((0.3, 0.4, 0.5))
    return build_grid(mapping, (3, 4, 5),
                      partition=UniformPartition(MaterialSpec(BRINE)))


def _parse_vtk(path):
    """Reads a legacy ASCII structured-grid file back into arrays."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert lines[2] == "ASCII"
    assert lines[3] == "DATASET STRUCTURED_GRID"
    dims = tuple(int(tok) for tok in lines[4].split()[1:])
    npts = int(lines[5].split()[1])
    i = 6
    pts = np.array([[float(x) for x in lines[i + r].split()]
                    for r in range(npts)])
    i += npts
    ncells = int(lines[i].split()[1])
    i += 1
    fields = {}
    while i < len(lines) and lines[i]:
        name = lines[i].split()[1]
        assert lines[i + 1] == "LOOKUP_TABLE default"
        i += 2
        fields[name] = np.array([float(lines[i + r]) for r in range(ncells)])
        i += ncells
    return dims, pts, fields


def test_vtk_round_trips_vertices_and_fields(small_grid, tmp_path):
    grid = small_grid
    state = uniform_state(grid)
    rng = np.random.default_rng(7)
    state.Q[grid.interior()] = rng.normal(size=grid.dims + (13,))

    path = tmp_path / "snap_3.vtk"
    write_snapshot(state, grid, path)
    dims, pts, fields = _parse_vtk(path)

    assert dims == (4, 5, 6)
    g = grid.ghost
    verts = grid.vertices[g:g + 4, g:g + 5, g:g + 6]
    want = np.stack([verts[..., c].reshape(-1, order="F")
                     for c in range(3)], axis=-1)
    assert np.allclose(pts, want, rtol=1e-8, atol=1e-12)

    assert list(fields) == list(COMPONENT_NAMES) + ["energy", "material_id"]
    for c, name in enumerate(COMPONENT_NAMES):
        got = fields[name]
        ref = state.Q[grid.interior()][..., c].reshape(-1, order="F")
        assert np.allclose(got, ref, rtol=1e-8, atol=1e-300)
    assert np.all(fields["material_id"] == 0)
    assert np.all(fields["energy"] >= 0.0)


def test_vtk_energy_is_zero_for_the_zero_state(small_grid, tmp_path):
    grid = small_grid
    path = write_snapshot(uniform_state(grid), grid, tmp_path / "snap_0.vtk")
    _, _, fields = _parse_vtk(path)
    assert np.all(fields["energy"] == 0.0)
    for name in COMPONENT_NAMES:
        assert np.all(fields[name] == 0.0)


def test_csv_slice_coordinates_equal_centroids(small_grid, tmp_path):
    grid = small_grid
    state = uniform_state(grid)
    state.Q[grid.interior()] = 0.5
    path = tmp_path / "slice.csv"
    write_snapshot(state, grid, path, format="csv-slice", slice_axis=2,
                   slice_index=1)

    with open(path) as fh:
        header = fh.readline().strip().split(",")
    assert header == ["x", "y", "z", *COMPONENT_NAMES,
                      "energy", "material_id"]
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (3 * 4, 18)
    cent = grid.centroid[grid.interior()][:, :, 1].reshape(-1, 3)
    assert np.allclose(data[:, :3], cent, rtol=1e-8, atol=1e-15)
    assert np.all(data[:, 3:16] == 0.5)


def test_csv_slice_defaults_to_the_middle_layer(small_grid, tmp_path):
    grid = small_grid
    path = write_snapshot(uniform_state(grid), grid, tmp_path / "s.csv",
                          format="csv-slice")
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    cent = grid.centroid[grid.interior()][:, :, 2]
    assert np.allclose(data[:, 2], cent[..., 2].ravel(), rtol=1e-8)


def test_write_snapshot_rejects_unknown_formats_and_bad_slices(
        small_grid, tmp_path):
    grid = small_grid
    state = uniform_state(grid)
    with pytest.raises(ValueError, match="unknown snapshot format"):
        write_snapshot(state, grid, tmp_path / "x", format="hdf5")
    with pytest.raises(ValueError, match="slice index"):
        write_snapshot(state, grid, tmp_path / "x", format="csv-slice",
                       slice_index=5)
    with pytest.raises(ValueError, match="slice axis"):
        write_snapshot(state, grid, tmp_path / "x", format="csv-slice",
                       slice_axis=3)


def test_write_snapshots_names_files_by_step(small_grid, tmp_path):
    grid = small_grid
    state = uniform_state(grid)
    written = write_snapshots(grid, state, tmp_path, 17,
                              formats=("vtk", "csv-slice"))
    assert written[0].endswith("snap_17.vtk")
    assert written[1].endswith("slice_17.csv")
    assert snapshot_path(tmp_path, 4).endswith("snap_4.vtk")


# -----------------------------------------------------------------------------
# Reports
# -----------------------------------------------------------------------------

def _sample_report():
    return ErrorReport(
        case_id=0, resolutions=(8, 16),
        norms={"1-norm": [0.25, 0.0625], "max-norm": [0.5, 0.125]},
        rates={"1-norm": 2.0, "max-norm": 2.0},
        per_component=[{"1-norm[p]": 0.3}, {"1-norm[p]": 0.07}])


def test_report_round_trip(tmp_path):
    path = tmp_path / "report.csv"
    write_report(path, [_sample_report()])
    with open(path) as fh:
        first = fh.readline()
        second = fh.readline().strip()
    assert first.startswith("#")
    assert second == "case,N,norm,value,rate"

    rows = read_report(path)
    stacked = [r for r in rows if r["norm"] == "1-norm"]
    assert [(r["N"], r["value"]) for r in stacked] == [(8, 0.25),
                                                       (16, 0.0625)]
    assert all(r["rate"] == 2.0 for r in stacked)
    comp = [r for r in rows if r["norm"] == "1-norm[p]"]
    assert [r["rate"] for r in comp] == [None, None]
    assert all(r["case"] == "0" for r in rows)


def test_read_report_flags_malformed_rows(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("case,N,norm,value,rate\n0,8,1-norm\n")
    with pytest.raises(ValueError, match="row 2 is malformed"):
        read_report(path)
    path.write_text("case,N,norm,value,rate\n0,eight,1-norm,0.1,\n")
    with pytest.raises(ValueError, match="row 2 is malformed"):
        read_report(path)
    path.write_text("")
    with pytest.raises(ValueError, match="empty"):
        read_report(path)


def test_plot_report_renders_series_with_fits(tmp_path):
    report_path = tmp_path / "report.csv"
    write_report(report_path, [_sample_report()])
    out = plot_report(report_path, tmp_path / "conv.png")
    assert out is not None
    png = (tmp_path / "conv.png").read_bytes()
    assert png[:8] == b"\x89PNG\r\n\x1a\n"


def test_plot_report_accepts_single_point_series(tmp_path):
    report = ErrorReport(
        case_id="5-e-full", resolutions=(50,),
        norms={"1-norm": [4e-3], "max-norm": [1.6e-2]},
        rates={"1-norm": None, "max-norm": None},
        per_component=[{}])
    path = tmp_path / "report.csv"
    write_report(path, [report])
    assert plot_report(path, tmp_path / "lim.png") is not None


def test_plot_report_returns_none_without_stacked_norms(tmp_path):
    path = tmp_path / "report.csv"
    path.write_text("case,N,norm,value,rate\n0,8,1-norm[p],0.1,\n")
    assert plot_report(path, tmp_path / "none.png") is None
    assert not (tmp_path / "none.png").exists()


def test_report_norms_survive_a_real_run_round_trip(tmp_path):
    # end to end: run a tiny case, write its norms, read them back
    from porowave.harness import run_config

    cfg = build_case(0, 6)
    grid, _, state, _ = run_config(cfg)
    stacked, comps = error_norms(grid, state, cfg.oracle)
    report = ErrorReport(case_id=0, resolutions=(6,),
                         norms={k: [v] for k, v in stacked.items()},
                         rates={k: None for k in stacked},
                         per_component=[comps])
    path = write_report(tmp_path / "report.csv", [report])
    rows = read_report(path)
    got = {r["norm"]: r["value"] for r in rows}
    assert got["1-norm"] == pytest.approx(stacked["1-norm"], rel=1e-8)
    assert got["max-norm"] == pytest.approx(stacked["max-norm"], rel=1e-8)
