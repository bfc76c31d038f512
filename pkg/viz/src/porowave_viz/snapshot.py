"""Reader for legacy ASCII VTK structured-grid snapshots.

The solver writes one structured grid per snapshot: a DIMENSIONS line
with vertex counts, a POINTS block (first index varying fastest), and
one CELL_DATA SCALARS block per field.  Loading returns read-only
arrays; nothing here mutates or rewrites the file.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

AXIS_NAMES = ("x", "y", "z")

# Short aliases accepted wherever a field name is expected.
FIELD_ALIASES = {"e": "energy"}


@dataclass(frozen=True)
class PlaneSlice:
    """One cell-centered plane of a snapshot.

    U and V hold the in-plane vertex coordinates (meters) bounding each
    cell, shaped one larger than the field arrays, ready for quad
    plotting.  fields maps each name to its 2D plane values.
    """

    axis: int
    index: int
    u_label: str
    v_label: str
    U: np.ndarray
    V: np.ndarray
    fields: dict[str, np.ndarray]


@dataclass(frozen=True)
class SnapshotView:
    """Coordinates and named cell fields from one snapshot file.

    Attributes:
        title: The file's title line (carries the output time).
        points: Vertex coordinates, shape (px, py, pz, 3).
        fields: Field name -> cell array (px-1, py-1, pz-1), ordered
            as in the file.
    """

    title: str
    points: np.ndarray
    fields: dict[str, np.ndarray]

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(s - 1 for s in self.points.shape[:3])

    @property
    def field_names(self) -> tuple[str, ...]:
        return tuple(self.fields)

    def field(self, name: str) -> np.ndarray:
        """Looks up a field, accepting aliases; lists names on a miss."""
        key = FIELD_ALIASES.get(name, name)
        if key not in self.fields:
            raise ValueError(
                f"field {name!r} not in snapshot; available: "
                + ", ".join(self.fields))
        return self.fields[key]

    def plane(self, axis, index: int | None = None) -> PlaneSlice:
        """Extracts one cell layer normal to the given axis.

        The index defaults to the middle layer.  Plane corner
        coordinates are the average of the two bounding vertex planes.
        """
        axis = AXIS_NAMES.index(axis) if axis in AXIS_NAMES else int(axis)
        if axis not in (0, 1, 2):
            raise ValueError(f"slice axis must be x, y, or z, got {axis!r}")
        n = self.dims[axis]
        if index is None:
            index = n // 2
        if not 0 <= index < n:
            raise ValueError(f"slice index {index} outside 0..{n - 1} "
                             f"along axis {AXIS_NAMES[axis]}")

        take = [slice(None)] * 3
        take[axis] = slice(index, index + 2)
        corners = self.points[tuple(take)].mean(axis=axis)
        u_comp, v_comp = [c for c in range(3) if c != axis]

        cell_take = [slice(None)] * 3
        cell_take[axis] = index
        cell_take = tuple(cell_take)
        return PlaneSlice(
            axis=axis,
            index=index,
            u_label=f"{AXIS_NAMES[u_comp]} (m)",
            v_label=f"{AXIS_NAMES[v_comp]} (m)",
            U=corners[..., u_comp],
            V=corners[..., v_comp],
            fields={name: arr[cell_take] for name, arr in self.fields.items()},
        )


def _expect(condition: bool, path: str, message: str) -> None:
    if not condition:
        raise ValueError(f"{path}: {message}")


def load_snapshot(path) -> SnapshotView:
    """Parses one legacy ASCII VTK structured-grid file."""
    path = str(path)
    with open(path) as fh:
        lines = fh.read().splitlines()

    _expect(len(lines) >= 6, path, "truncated VTK header")
    _expect(lines[0].startswith("# vtk DataFile"), path,
            "missing VTK version line")
    title = lines[1]
    _expect(lines[2].strip() == "ASCII", path, "only ASCII VTK is supported")
    _expect(lines[3].strip() == "DATASET STRUCTURED_GRID", path,
            "not a structured-grid dataset")

    tok = lines[4].split()
    _expect(len(tok) == 4 and tok[0] == "DIMENSIONS", path,
            f"bad DIMENSIONS line: {lines[4]!r}")
    pdims = tuple(int(t) for t in tok[1:])

    tok = lines[5].split()
    _expect(len(tok) == 3 and tok[0] == "POINTS", path,
            f"bad POINTS line: {lines[5]!r}")
    npts = int(tok[1])
    _expect(npts == pdims[0] * pdims[1] * pdims[2], path,
            f"POINTS count {npts} does not match DIMENSIONS {pdims}")

    pos = 6
    _expect(len(lines) >= pos + npts, path, "truncated POINTS block")
    pts = np.loadtxt(lines[pos:pos + npts], dtype=float, ndmin=2)
    _expect(pts.shape == (npts, 3), path, "POINTS rows must hold 3 floats")
    pos += npts

    points = np.empty(pdims + (3,))
    for c in range(3):
        points[..., c] = pts[:, c].reshape(pdims, order="F")
    points.setflags(write=False)

    _expect(pos < len(lines), path, "missing CELL_DATA block")
    tok = lines[pos].split()
    _expect(len(tok) == 2 and tok[0] == "CELL_DATA", path,
            f"bad CELL_DATA line: {lines[pos]!r}")
    ncells = int(tok[1])
    cdims = tuple(s - 1 for s in pdims)
    _expect(ncells == cdims[0] * cdims[1] * cdims[2], path,
            f"CELL_DATA count {ncells} does not match DIMENSIONS {pdims}")
    pos += 1

    fields: dict[str, np.ndarray] = {}
    while pos < len(lines):
        if not lines[pos].strip():
            pos += 1
            continue
        tok = lines[pos].split()
        _expect(tok[0] == "SCALARS" and len(tok) >= 2, path,
                f"expected SCALARS block, got {lines[pos]!r}")
        name = tok[1]
        _expect(pos + 1 < len(lines)
                and lines[pos + 1].startswith("LOOKUP_TABLE"), path,
                f"SCALARS {name} is missing its LOOKUP_TABLE line")
        pos += 2
        _expect(len(lines) >= pos + ncells, path,
                f"truncated values for field {name!r}")
        values = np.asarray(lines[pos:pos + ncells], dtype=float)
        arr = values.reshape(cdims, order="F")
        arr.setflags(write=False)
        _expect(name not in fields, path, f"duplicate field {name!r}")
        fields[name] = arr
        pos += ncells

    _expect(bool(fields), path, "snapshot holds no cell fields")
    return SnapshotView(title=title, points=points, fields=fields)
