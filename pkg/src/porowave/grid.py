"""Logically rectangular mapped hexahedral grids.

A grid is defined by a smooth mapping from the unit computational cube
to physical space.  Vertices are the mapped images of a uniform
computational lattice (extended outward for ghost cells), cells are the
trilinear hexahedra spanned by eight neighboring vertices, and face
normals/areas come from the midpoint-difference cross product, which
equals the exact integral of the unit normal over the bilinear face.
Cell volumes and centroids use 2x2x2 Gauss-Legendre quadrature, exact
for trilinear cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from porowave.materials import (
    FluidMaterial,
    MaterialSpec,
    PoroelasticDerived,
)

__all__ = [
    "GridMapping",
    "FaceGeometry",
    "Cell",
    "MappedGrid",
    "scaled_box_mapping",
    "tilt_mapping",
    "undulating_bed_mapping",
    "bed_surface_height",
    "bed_surface_normal",
    "UniformPartition",
    "UndulatingBedPartition",
    "face_normal_area",
    "cell_volume_centroid",
    "build_grid",
]

# 2-point Gauss-Legendre nodes on [0,1]; weights are 1/2 each.
_GL2 = (0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0))


@dataclass(frozen=True, eq=False)
class GridMapping:
    """Mapping from computational coordinates in [0,1]^3 to physical space.

    The callable must accept an (..., 3) array of computational
    coordinates and return an (..., 3) array of physical positions; it
    must be well-defined slightly outside the unit cube so that ghost
    vertices can be generated by direct evaluation.
    """

    name: str
    map: Callable[[np.ndarray], np.ndarray]
    params: dict = field(default_factory=dict)

    def __call__(self, xi: np.ndarray) -> np.ndarray:
        return self.map(np.asarray(xi, dtype=float))


@dataclass(frozen=True, eq=False)
class FaceGeometry:
    """Unit normal (oriented along increasing grid index) and area."""

    n: np.ndarray
    A: np.ndarray


@dataclass(frozen=True, eq=False)
class Cell:
    """One hexahedral cell, assembled from the grid arrays on demand."""

    vertices: np.ndarray  # (2, 2, 2, 3)
    volume: float
    centroid: np.ndarray
    capacity: float
    material: PoroelasticDerived | FluidMaterial
    rotation: np.ndarray  # 3x3


# -----------------------------------------------------------------------------
# Built-in mappings
# -----------------------------------------------------------------------------

def scaled_box_mapping(edge, rotation=None) -> GridMapping:
    """Cube of the given edge length centered at the origin.

    Args:
        edge: Edge length (m), or a 3-sequence for a box.
        rotation: Optional AxesRotation applied to the whole box (used to
            rotate the grid relative to global axes).
    """
    edge = np.broadcast_to(np.asarray(edge, dtype=float), (3,)).copy()
    R = None if rotation is None else np.asarray(rotation.R, dtype=float)

    def _map(xi):
        x = (xi - 0.5) * edge
        if R is not None:
            x = x @ R.T
        return x

    return GridMapping(
        name="scaled_box", map=_map,
        params={"edge": tuple(edge), "rotation": rotation},
    )


def tilt_mapping(edge, sigma=0.1) -> GridMapping:
    """Cube with interior grid surfaces tilted about the midplane.

    On internal coordinates (a, b, c) in [-1,1]^3 (affinely stretched
    from the unit cube) the physical point is

        x = a L/2,  y = b L/2,
        z = (c + sigma * a * c^3) L/2   for c < 0,
        z = (c + sigma * b * c^3) L/2   otherwise.

    The two z branches join C2-smoothly at c = 0 since c^3 and its first
    two derivatives vanish there; verified by finite differences at
    construction.
    """
    L = float(edge)

    def _map(xi):
        abc = 2.0 * xi - 1.0
        a, b, c = abc[..., 0], abc[..., 1], abc[..., 2]
        tilt = np.where(c < 0.0, a, b)
        out = np.empty_like(abc)
        out[..., 0] = a * (L / 2.0)
        out[..., 1] = b * (L / 2.0)
        out[..., 2] = (c + sigma * tilt * c**3) * (L / 2.0)
        return out

    mapping = GridMapping(
        name="tilt", map=_map, params={"edge": L, "sigma": sigma},
    )
    _check_tilt_seam(mapping)
    return mapping


def _check_tilt_seam(mapping: GridMapping) -> None:
    """Finite-difference C2 check across the branch seam of the tilt map.

    Each z branch is cubic in the internal coordinate c, so a one-sided
    cubic fit reconstructs the branch value and its first two
    derivatives at the seam exactly (to roundoff); the two sides must
    agree to 1e-10 relative to the edge length.
    """
    L = mapping.params["edge"]
    nodes = np.array([0.05, 0.10, 0.15, 0.20])
    for a, b in ((0.7, -0.3), (-0.5, 0.9), (0.25, 0.25)):
        xi12 = (0.5 * (a + 1.0), 0.5 * (b + 1.0))

        def z_at(c):
            return np.array(
                [mapping(np.array([*xi12, 0.5 * (ci + 1.0)]))[2] for ci in c])

        p_lo = np.polyfit(-nodes, z_at(-nodes), 3)
        p_hi = np.polyfit(nodes, z_at(nodes), 3)
        for k, (lo, hi) in enumerate(
                ((p_lo[3], p_hi[3]), (p_lo[2], p_hi[2]), (p_lo[1], p_hi[1]))):
            if abs(lo - hi) > 1e-10 * L:
                raise ValueError(
                    f"tilt map branches do not join smoothly "
                    f"(derivative order {k})"
                )


_BED_DEFAULTS = dict(
    z0=0.0,
    Lx=2.0,
    Ly=2.0,
    Hx=3.0 * 2.0 / (16.0 * math.pi),
    Hy=3.0 * 2.0 / (16.0 * math.pi),
    z_bot=-1.0,
    z_top=0.5,
    xi_bot=0.15,
    xi_int=0.6,
    xi_top=0.9,
)


def bed_surface_height(x, y, params) -> np.ndarray:
    """Height of the undulating bed surface above given (x, y)."""
    p = params
    tx = p["Hx"] * np.cos(2.0 * np.pi * np.asarray(x) / p["Lx"])
    ty = p["Hy"] * np.cos(2.0 * np.pi * np.asarray(y) / p["Ly"])
    # Coded as z0 + (tx + ty): the parenthesized sum commutes bitwise,
    # keeping the surface exactly symmetric under x <-> y.
    return p["z0"] + (tx + ty)


def bed_surface_normal(x, y, params) -> np.ndarray:
    """Upward unit normal of the bed surface at given (x, y)."""
    p = params
    gx = p["Hx"] * (2.0 * np.pi / p["Lx"]) * np.sin(
        2.0 * np.pi * np.asarray(x, dtype=float) / p["Lx"])
    gy = p["Hy"] * (2.0 * np.pi / p["Ly"]) * np.sin(
        2.0 * np.pi * np.asarray(y, dtype=float) / p["Ly"])
    n = np.stack(np.broadcast_arrays(gx, gy, np.ones_like(gx + gy)), axis=-1)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


def undulating_bed_mapping(**overrides) -> GridMapping:
    """Box with an undulating internal material surface.

    The physical domain is [0, Lx/2] x [0, Ly/2] horizontally.  The
    vertical mapping has four branches in xi3: hyperbolic-sine
    stretching below xi_bot and above xi_top, and between them a linear
    ramp plus a smooth bulge that places the bed surface z_int(x, y)
    exactly on the xi3 = xi_int coordinate surface.
    """
    p = dict(_BED_DEFAULTS)
    p.update(overrides)
    p["r_bot"] = 2.0 / p["xi_bot"]
    p["r_top"] = 2.0 / (1.0 - p["xi_top"])

    xi_bot, xi_int, xi_top = p["xi_bot"], p["xi_int"], p["xi_top"]
    r_bot, r_top = p["r_bot"], p["r_top"]
    z_bot, z_top, z0 = p["z_bot"], p["z_top"], p["z0"]
    z_lo = z0 - p["Hx"] - p["Hy"]   # lowest point of the bed surface
    z_hi = z0 + p["Hx"] + p["Hy"]   # highest point of the bed surface
    slope_bot = (z_lo - z_bot) / (xi_int - xi_bot)
    slope_top = (z_top - z_hi) / (xi_top - xi_int)

    def _bulge(xi3, xi_star):
        u = (xi3 - xi_star) / (xi_int - xi_star)
        return 0.5 * (np.sqrt(1.0 + 8.0 * u * u) - 1.0)

    def _map(xi):
        out = np.empty(xi.shape, dtype=float)
        x = xi[..., 0] * (p["Lx"] / 2.0)
        y = xi[..., 1] * (p["Ly"] / 2.0)
        xi3 = xi[..., 2]
        z_int = bed_surface_height(x, y, p)
        a_bot = z_int - z_lo
        a_top = z_int - z_hi

        z = np.where(
            xi3 < xi_bot,
            z_bot + (slope_bot / r_bot) * np.sinh(r_bot * (xi3 - xi_bot)),
            np.where(
                xi3 < xi_int,
                z_bot + slope_bot * (xi3 - xi_bot) + a_bot * _bulge(xi3, xi_bot),
                np.where(
                    xi3 < xi_top,
                    z_top + slope_top * (xi3 - xi_top) + a_top * _bulge(xi3, xi_top),
                    z_top + (slope_top / r_top) * np.sinh(r_top * (xi3 - xi_top)),
                ),
            ),
        )
        out[..., 0] = x
        out[..., 1] = y
        out[..., 2] = z
        return out

    return GridMapping(name="undulating_bed", map=_map, params=p)


# -----------------------------------------------------------------------------
# Material partitions
# -----------------------------------------------------------------------------

class UniformPartition:
    """Single material everywhere; rotation carried by the MaterialSpec."""

    def __init__(self, spec: MaterialSpec):
        self.materials = (spec,)

    def assign(self, xi_centers, centroids):
        ids = np.zeros(xi_centers.shape[:-1], dtype=np.int8)
        return ids, None


class UndulatingBedPartition:
    """Solid below the bed surface, fluid above.

    Solid cells receive principal axes from the bed-surface normal
    evaluated at the (x, y) of the cell centroid; fluid cells keep
    identity axes.
    """

    def __init__(self, params: dict, solid: PoroelasticDerived,
                 fluid: FluidMaterial):
        self.params = dict(params)
        self.materials = (MaterialSpec(solid), MaterialSpec(fluid))

    def assign(self, xi_centers, centroids):
        p = self.params
        ids = np.where(xi_centers[..., 2] < p["xi_int"], 0, 1).astype(np.int8)
        normals = bed_surface_normal(centroids[..., 0], centroids[..., 1], p)
        rotations = _rotations_from_normals(normals)
        rotations[ids != 0] = np.eye(3)
        return ids, rotations


def _rotations_from_normals(normals: np.ndarray) -> np.ndarray:
    """Vectorized minimal rotations taking z-hat to each normal.

    Identical formula to rotation_from_surface_normal: with
    a = z x n and K = skew(a), R = I + K + K@K / (1 + n_z).
    """
    n = np.asarray(normals, dtype=float)
    nx, ny, nz = n[..., 0], n[..., 1], n[..., 2]
    if np.any(nz <= -1.0 + 1e-12):
        raise ValueError("surface normal antiparallel to the z axis")
    K = np.zeros(n.shape[:-1] + (3, 3))
    K[..., 0, 2] = nx
    K[..., 1, 2] = ny
    K[..., 2, 0] = -nx
    K[..., 2, 1] = -ny
    R = np.eye(3) + K + (K @ K) / (1.0 + nz)[..., None, None]
    return R


# -----------------------------------------------------------------------------
# Geometry primitives
# -----------------------------------------------------------------------------

def face_normal_area(quad, direction: int = 0) -> FaceGeometry:
    """Normal-area vector of a (possibly non-planar) quadrilateral face.

    The integral of the unit normal over the bilinear face spanned by
    the four vertices equals the cross product of the two vectors
    connecting midpoints of opposite edges; this is computed exactly.

    Args:
        quad: (..., 4, 3) vertices ordered (00, 10, 01, 11) in the two
            face parameters; for a +xi_d face the parameters are the
            cyclically following directions (d+1, d+2).
        direction: Grid direction of the face, used only as the
            placeholder normal for zero-area faces.

    Returns:
        FaceGeometry with unit normal (along increasing grid index) and
        area; degenerate faces get A = 0 and the +direction placeholder.
    """
    quad = np.asarray(quad, dtype=float)
    da = 0.5 * (quad[..., 1, :] + quad[..., 3, :]
                - quad[..., 0, :] - quad[..., 2, :])
    db = 0.5 * (quad[..., 2, :] + quad[..., 3, :]
                - quad[..., 0, :] - quad[..., 1, :])
    nA = np.cross(da, db)
    A = np.linalg.norm(nA, axis=-1)
    placeholder = np.zeros(3)
    placeholder[direction] = 1.0
    safe = np.where(A > 0.0, A, 1.0)
    n = np.where((A > 0.0)[..., None], nA / safe[..., None], placeholder)
    return FaceGeometry(n=n, A=A)


# Shape-function values and gradients of the trilinear map at the 8
# Gauss-Legendre nodes: _GL_N is (8 nodes, 8 corners), _GL_G is
# (8 nodes, 8 corners, 3).  Corner index c = 4*i1 + 2*i2 + i3.
def _gl_tables():
    nodes = [(a, b, c) for a in _GL2 for b in _GL2 for c in _GL2]
    N = np.empty((8, 8))
    G = np.empty((8, 8, 3))
    for g, (x, y, z) in enumerate(nodes):
        for c, (i, j, k) in enumerate(
                (i, j, k) for i in (0, 1) for j in (0, 1) for k in (0, 1)):
            fx, fy, fz = (x if i else 1 - x), (y if j else 1 - y), (z if k else 1 - z)
            dx, dy, dz = (1.0 if i else -1.0), (1.0 if j else -1.0), (1.0 if k else -1.0)
            N[g, c] = fx * fy * fz
            G[g, c] = (dx * fy * fz, fx * dy * fz, fx * fy * dz)
    return N, G


_GL_N, _GL_G = _gl_tables()


def cell_volume_centroid(vertices):
    """Volume and centroid of trilinear cells by 2x2x2 Gauss-Legendre.

    Args:
        vertices: (..., 2, 2, 2, 3) corner positions indexed by
            computational direction.

    Returns:
        (volume, centroid) arrays of shapes (...) and (..., 3).  The
        quadrature is exact for trilinear mappings.  Volumes may be
        non-positive for inverted input; callers decide whether that is
        fatal.
    """
    v = np.asarray(vertices, dtype=float)
    P = v.reshape(v.shape[:-4] + (8, 3))
    jac = np.einsum("...cv,gcd->...gdv", P, _GL_G)
    det = np.linalg.det(jac)
    pos = np.einsum("...cv,gc->...gv", P, _GL_N)
    volume = 0.125 * det.sum(axis=-1)
    weighted = 0.125 * np.einsum("...gv,...g->...v", pos, det)
    with np.errstate(divide="ignore", invalid="ignore"):
        centroid = weighted / volume[..., None]
    return volume, centroid


# -----------------------------------------------------------------------------
# Grid assembly
# -----------------------------------------------------------------------------

@dataclass(eq=False)
class MappedGrid:
    """A fully assembled mapped grid, including ghost cells.

    Cell arrays are indexed [i1, i2, i3] over N_d + 2*ghost cells per
    direction.  Face arrays for direction d have one extra entry along
    d; face f along a pencil lies between cells f-1 and f.  All arrays
    are treated as immutable after construction.
    """

    dims: tuple[int, int, int]
    ghost: int
    dxi: tuple[float, float, float]
    mapping: GridMapping
    vertices: np.ndarray
    volume: np.ndarray
    centroid: np.ndarray
    capacity: np.ndarray
    face_normal: tuple[np.ndarray, np.ndarray, np.ndarray]
    face_area: tuple[np.ndarray, np.ndarray, np.ndarray]
    materials: tuple[MaterialSpec, ...]
    material_id: np.ndarray
    rotation: np.ndarray | None

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.volume.shape

    def interior(self) -> tuple[slice, slice, slice]:
        g = self.ghost
        return tuple(slice(g, g + n) for n in self.dims)

    def total_volume(self) -> float:
        return float(self.volume[self.interior()].sum())

    def cell(self, i: int, j: int, k: int) -> Cell:
        """Cell view at raw array indices (ghosts included)."""
        spec = self.materials[self.material_id[i, j, k]]
        if self.rotation is not None:
            rot = self.rotation[i, j, k]
        else:
            rot = spec.rotation.R
        return Cell(
            vertices=self.vertices[i:i + 2, j:j + 2, k:k + 2],
            volume=float(self.volume[i, j, k]),
            centroid=self.centroid[i, j, k],
            capacity=float(self.capacity[i, j, k]),
            material=spec.material,
            rotation=rot,
        )


def _face_quads(verts: np.ndarray, d: int) -> np.ndarray:
    """(..., 4, 3) vertex quads for all faces of direction d."""
    a, b = (d + 1) % 3, (d + 2) % 3

    def corner(ia, ib):
        sl = [slice(0, -1)] * 3
        sl[a] = slice(1, None) if ia else slice(0, -1)
        sl[b] = slice(1, None) if ib else slice(0, -1)
        sl[d] = slice(None)
        return verts[tuple(sl)]

    return np.stack(
        [corner(0, 0), corner(1, 0), corner(0, 1), corner(1, 1)], axis=-2)


def build_grid(mapping: GridMapping, dims, ghost: int = 2,
               partition=None) -> MappedGrid:
    """Builds the full grid: vertices, faces, volumes, materials.

    Ghost-cell geometry comes from evaluating the mapping at extended
    computational coordinates; every built-in map is defined there.

    Args:
        mapping: Computational-to-physical mapping.
        dims: Interior cell counts (N1, N2, N3), each >= 1.
        ghost: Ghost-cell width (the sweeps require 2).
        partition: Material partition.  Geometry-only uses may omit it;
            time stepping requires one.

    Returns:
        MappedGrid.

    Raises:
        ValueError: "inverted cell" with the offending index when any
            cell volume is non-positive.
    """
    dims = tuple(int(n) for n in dims)
    if any(n < 1 for n in dims):
        raise ValueError("grid dims must each be >= 1")
    dxi = tuple(1.0 / n for n in dims)

    coords = [
        (np.arange(-ghost, n + ghost + 1)) / n
        for n in dims
    ]
    xi = np.stack(np.meshgrid(*coords, indexing="ij"), axis=-1)
    verts = mapping(xi)

    corners = verts[:-1, :-1, :-1]
    cell_verts = np.empty(corners.shape[:-1] + (2, 2, 2, 3))
    for i in (0, 1):
        for j in (0, 1):
            for k in (0, 1):
                sl = (
                    slice(i, verts.shape[0] - 1 + i),
                    slice(j, verts.shape[1] - 1 + j),
                    slice(k, verts.shape[2] - 1 + k),
                )
                cell_verts[..., i, j, k, :] = verts[sl]

    volume, centroid = cell_volume_centroid(cell_verts)
    if np.any(volume <= 0.0):
        bad = np.argwhere(volume <= 0.0)[0]
        idx = tuple(int(b) - ghost for b in bad)
        raise ValueError(
            f"inverted cell at interior index {idx} "
            f"(volume {volume[tuple(bad)]:.3e})"
        )
    capacity = volume / (dxi[0] * dxi[1] * dxi[2])

    face_normal = []
    face_area = []
    for d in range(3):
        quads = _face_quads(verts, d)
        fg = face_normal_area(quads, direction=d)
        face_normal.append(fg.n)
        face_area.append(fg.A)

    xi_centers = np.stack(
        np.meshgrid(
            *[(np.arange(-ghost, n + ghost) + 0.5) / n for n in dims],
            indexing="ij"),
        axis=-1)
    if partition is None:
        materials: tuple = ()
        material_id = np.zeros(volume.shape, dtype=np.int8)
        rotation = None
    else:
        material_id, rotation = partition.assign(xi_centers, centroid)
        materials = tuple(partition.materials)

    return MappedGrid(
        dims=dims, ghost=ghost, dxi=dxi, mapping=mapping,
        vertices=verts, volume=volume, centroid=centroid, capacity=capacity,
        face_normal=tuple(face_normal), face_area=tuple(face_area),
        materials=materials, material_id=material_id, rotation=rotation,
    )
