"""Snapshot loader and slicing tests against hand-built VTK files."""

import numpy as np
import pytest
from conftest import vtk_text

from porowave_viz import load_snapshot

# F-order cell values 1..4 on the 2x2x1 grid: arr[i, j, 0] below.
P_CELLS = np.array([[[1.0], [3.0]], [[2.0], [4.0]]])


def test_round_trip(write_snapshot):
    path = write_snapshot({
        "p": P_CELLS,
        "energy": np.zeros((2, 2, 1)),
        "material_id": np.array([[[0.0], [0.0]], [[1.0], [1.0]]]),
    })
    view = load_snapshot(path)
    assert view.title == "wave state at t = 1e-05 s"
    assert view.dims == (2, 2, 1)
    assert view.field_names == ("p", "energy", "material_id")
    assert np.array_equal(view.fields["p"], P_CELLS)
    assert np.array_equal(view.fields["material_id"][:, 0, 0], [0.0, 1.0])
    # points[i, j, k] carries the vertex at (x_i, y_j, z_k)
    assert view.points.shape == (3, 3, 2, 3)
    assert tuple(view.points[2, 1, 1]) == (2.0, 2.0, 3.0)


def test_arrays_are_read_only(write_snapshot):
    view = load_snapshot(write_snapshot({"p": P_CELLS}))
    with pytest.raises(ValueError):
        view.fields["p"][0, 0, 0] = 9.0
    with pytest.raises(ValueError):
        view.points[0, 0, 0, 0] = 9.0


def test_field_alias_and_missing_listing(write_snapshot):
    view = load_snapshot(write_snapshot({
        "p": P_CELLS, "energy": np.ones((2, 2, 1)),
    }))
    assert view.field("e") is view.fields["energy"]
    with pytest.raises(ValueError, match=r"'v_z'.*available: p, energy"):
        view.field("v_z")


def test_plane_default_is_middle_layer(write_snapshot):
    view = load_snapshot(write_snapshot({"p": P_CELLS}))
    plane = view.plane("z")
    assert (plane.axis, plane.index) == (2, 0)
    assert (plane.u_label, plane.v_label) == ("x (m)", "y (m)")
    assert np.array_equal(plane.U, [[0, 0, 0], [1, 1, 1], [2, 2, 2]])
    assert np.array_equal(plane.V, [[0, 2, 4]] * 3)
    assert np.array_equal(plane.fields["p"], [[1, 3], [2, 4]])


def test_plane_accepts_axis_number(write_snapshot):
    view = load_snapshot(write_snapshot({"p": P_CELLS}))
    by_name, by_number = view.plane("x", 1), view.plane(0, 1)
    assert by_name.axis == by_number.axis == 0
    assert np.array_equal(by_name.fields["p"], by_number.fields["p"])
    assert np.array_equal(by_name.fields["p"], [[2.0], [4.0]])


def test_plane_corners_average_the_bounding_planes(write_snapshot):
    # Shear z by +0.5 per x vertex so the averaged corner z is visible.
    def sheared(i, j, k):
        return float(i), 2.0 * j, 3.0 * k + 0.5 * i

    view = load_snapshot(write_snapshot({"p": P_CELLS}, points_fn=sheared))
    plane = view.plane("x", 0)
    # Corner z between i=0 and i=1 planes: 3k + 0.5 * 0.5.
    assert np.allclose(plane.V, [[0.25, 3.25]] * 3)
    assert np.allclose(plane.U, [[0, 0], [2, 2], [4, 4]])


def test_plane_index_out_of_range(write_snapshot):
    view = load_snapshot(write_snapshot({"p": P_CELLS}))
    with pytest.raises(ValueError, match=r"outside 0\.\.0 along axis z"):
        view.plane("z", 1)
    with pytest.raises(ValueError, match="outside"):
        view.plane("z", -1)
    with pytest.raises(ValueError, match="slice axis"):
        view.plane(3)


@pytest.mark.parametrize("mutate, match", [
    (lambda t: t.replace("ASCII", "BINARY"), "only ASCII"),
    (lambda t: t.replace("STRUCTURED_GRID", "POLYDATA"), "structured-grid"),
    (lambda t: t.replace("POINTS 18", "POINTS 17"), "does not match"),
    (lambda t: t.replace("CELL_DATA 4", "CELL_DATA 5"), "does not match"),
    (lambda t: t.replace("LOOKUP_TABLE default\n", "", 1), "LOOKUP_TABLE"),
])
def test_malformed_files_are_diagnosed(tmp_path, mutate, match):
    good = vtk_text({"p": P_CELLS})
    path = tmp_path / "bad.vtk"
    path.write_text(mutate(good))
    with pytest.raises(ValueError, match=match):
        load_snapshot(path)


def test_duplicate_and_absent_fields(tmp_path):
    text = vtk_text({"p": P_CELLS})
    block = text[text.index("SCALARS"):]
    dup = text + block
    path = tmp_path / "dup.vtk"
    path.write_text(dup)
    with pytest.raises(ValueError, match="duplicate field 'p'"):
        load_snapshot(path)

    bare = text[:text.index("SCALARS")]
    path = tmp_path / "empty.vtk"
    path.write_text(bare)
    with pytest.raises(ValueError, match="no cell fields"):
        load_snapshot(path)


def test_truncated_value_block(tmp_path):
    text = vtk_text({"p": P_CELLS})
    path = tmp_path / "short.vtk"
    path.write_text(text.rstrip("\n").rsplit("\n", 1)[0] + "\n")
    with pytest.raises(ValueError, match="truncated values for field 'p'"):
        load_snapshot(path)


def test_error_messages_name_the_file(tmp_path):
    path = tmp_path / "nonsense.vtk"
    path.write_text("not\na\nvtk\nfile\nat\nall\n")
    with pytest.raises(ValueError, match="nonsense.vtk"):
        load_snapshot(path)
