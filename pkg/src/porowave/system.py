"""Directional system matrices and their wave decompositions.

The governing equations are written as

    dQ/dt + A_breve(n) dQ/dn = D Q

along a unit direction n in the material's principal axes.  A_breve has
zero diagonal blocks: the stress-pressure rows couple only to velocity
columns (block A_sv) and vice versa (block A_vs).  D is nonzero only in
the velocity rows and flux columns.

Wave bases are computed from the inviscid operator by a symmetric
eigenproblem: with the energy matrix E, the matrix E^{1/2} A_breve
E^{-1/2} is real symmetric, so speeds come out real and the returned
vectors are E-orthonormal for free.  Viscosity never enters the
decomposition; it is handled separately by the relaxation source term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from porowave.materials import (
    AxesRotation,
    FluidMaterial,
    MaterialSpec,
    PoroelasticDerived,
    energy_matrix,
    state_rotation_matrix,
)
from porowave.state import NSTATE, P, Q1, V1

__all__ = [
    "SystemMatrices",
    "EigenBasis",
    "assemble_poro",
    "assemble_fluid",
    "eigendecompose",
]

# Relative threshold separating the 5-dimensional kernel of the inviscid
# poroelastic operator from its 8 propagating modes.
_NULL_SPACE_RTOL = 1e-8

# Relative speed gap below which the two shear families are treated as
# degenerate and re-split against the reference direction.
_SHEAR_TIE_RTOL = 1e-8

# Component permutation realizing a swap of principal axes 1 and 2:
# tau11<->tau22, tau23<->tau13, v1<->v2, q1<->q2.
_SWAP12 = np.array([1, 0, 2, 4, 3, 5, 6, 8, 7, 9, 11, 10, 12])


@dataclass(frozen=True, eq=False)
class SystemMatrices:
    """Directional coefficient matrix and dissipation matrix.

    Attributes:
        A_breve: 13x13 coefficient of the directional derivative.
        D: 13x13 dissipation matrix (zero for fluids and for eta == 0).
        n: The unit direction, in the material's principal axes.
        A_sv: 7x6 stress-rows/velocity-columns block of A_breve.
        A_vs: 6x7 velocity-rows/stress-columns block of A_breve.
        D_v: 6x6 velocity block of D; its first three columns are zero.
    """

    A_breve: np.ndarray
    D: np.ndarray
    n: np.ndarray

    @property
    def A_sv(self) -> np.ndarray:
        return self.A_breve[:7, 7:]

    @property
    def A_vs(self) -> np.ndarray:
        return self.A_breve[7:, :7]

    @property
    def D_v(self) -> np.ndarray:
        return self.D[7:, 7:]


@dataclass(frozen=True, eq=False)
class EigenBasis:
    """Wave speeds and E-orthonormal eigenvectors along one direction.

    Vectors are expressed in GLOBAL axes and normalized to unit E-norm.
    Waves are ordered left-to-right by signed speed, so a poroelastic
    basis reads FastP-, S1-, S2-, SlowP-, SlowP+, S2+, S1+, FastP+ and a
    fluid basis reads Acoustic-, Acoustic+.

    Attributes:
        speeds: Signed speeds (m/s), negative = left-going; length 8 or 2.
        vectors: Matching eigenvectors, one per column (13 x count).
        families: Family tag per wave: FastP, S1, S2, SlowP, or Acoustic.
        sides: "left" or "right" per wave.
        Er: E @ vectors (13 x count), with E in global axes.  With unit
            E-norm vectors the wave strength of a jump dQ is Er^T dQ.
    """

    speeds: np.ndarray
    vectors: np.ndarray
    families: tuple[str, ...]
    sides: tuple[str, ...]
    Er: np.ndarray


# -----------------------------------------------------------------------------
# Assembly
# -----------------------------------------------------------------------------

def _normal_selector(n: np.ndarray) -> np.ndarray:
    """6x3 matrix taking a vector u to the Voigt form of sym(n u^T)."""
    n1, n2, n3 = n
    return np.array([
        [n1, 0.0, 0.0],
        [0.0, n2, 0.0],
        [0.0, 0.0, n3],
        [0.0, n3, n2],
        [n3, 0.0, n1],
        [n2, n1, 0.0],
    ])


def assemble_poro(mat: PoroelasticDerived, n) -> SystemMatrices:
    """Assembles A_breve(n) and D for a poroelastic medium.

    Args:
        mat: Derived material coefficients.
        n: Unit direction in the material's principal axes.

    Returns:
        SystemMatrices; D reflects the material's viscosity (zero block
        when eta == 0).
    """
    n = np.asarray(n, dtype=float)
    N = _normal_selector(n)
    alpha6 = np.zeros(6)
    alpha6[:3] = mat.alpha
    M = mat.M

    A_sv = np.zeros((7, 6))
    A_sv[:6, :3] = mat.c_u @ N
    A_sv[:6, 3:] = M * np.outer(alpha6, n)
    A_sv[6, :3] = -M * (mat.alpha * n)
    A_sv[6, 3:] = -M * n
    A_sv = -A_sv

    m_over = mat.m / mat.Delta
    rf_over = mat.base.rho_f / mat.Delta
    r_over = mat.rho / mat.Delta
    A_vs = np.zeros((6, 7))
    A_vs[:3, :6] = m_over[:, None] * N.T
    A_vs[:3, 6] = rf_over * n
    A_vs[3:, :6] = -rf_over[:, None] * N.T
    A_vs[3:, 6] = -r_over * n
    A_vs = -A_vs

    A = np.zeros((NSTATE, NSTATE))
    A[:7, 7:] = A_sv
    A[7:, :7] = A_vs

    D = np.zeros((NSTATE, NSTATE))
    eta = mat.base.eta
    if eta > 0.0:
        rate = eta / (mat.Delta * np.asarray(mat.base.kappa))
        for i in range(3):
            D[V1 + i, Q1 + i] = mat.base.rho_f * rate[i]
            D[Q1 + i, Q1 + i] = -mat.rho * rate[i]
    return SystemMatrices(A_breve=A, D=D, n=n)


def assemble_fluid(mat: FluidMaterial, n) -> SystemMatrices:
    """Assembles the acoustic A_breve(n) for a fluid; D is zero.

    The pressure row is K_f n^T against the flux columns and the flux
    rows are n/rho_f against the pressure column, giving exactly six
    nonzero entries.
    """
    n = np.asarray(n, dtype=float)
    A = np.zeros((NSTATE, NSTATE))
    A[P, Q1:] = mat.K_f * n
    A[Q1:, P] = n / mat.rho_f
    return SystemMatrices(A_breve=A, D=np.zeros((NSTATE, NSTATE)), n=n)


# -----------------------------------------------------------------------------
# Eigendecomposition
# -----------------------------------------------------------------------------

# Cache of (E, E^{1/2}, E^{-1/2}) keyed by material identity.  Holding the
# material in the value keeps its id stable for the cache lifetime.
_ENERGY_ROOTS: dict[int, tuple] = {}


def _energy_roots(mat: PoroelasticDerived):
    entry = _ENERGY_ROOTS.get(id(mat))
    if entry is not None and entry[0] is mat:
        return entry[1]
    E = energy_matrix(mat).E
    w, U = np.linalg.eigh(E)
    if w[0] <= 0.0:
        raise ValueError(
            f"decomposition failed (material {mat.name!r}): "
            "energy matrix is not positive-definite"
        )
    sq = np.sqrt(w)
    E_half = (U * sq) @ U.T
    E_mhalf = (U / sq) @ U.T
    data = (E, E_half, E_mhalf)
    _ENERGY_ROOTS[id(mat)] = (mat, data)
    return data


def _is_transverse_12(base) -> bool:
    """True when principal axes 1 and 2 are exactly interchangeable."""
    return (
        base.c11 == base.c22
        and base.c13 == base.c23
        and base.c44 == base.c55
        and base.kappa[0] == base.kappa[1]
        and base.T[0] == base.T[1]
    )


def _fluid_basis(mat: FluidMaterial, n: np.ndarray) -> EigenBasis:
    scale = 1.0 / np.sqrt(2.0 * mat.rho_f)
    vectors = np.zeros((NSTATE, 2))
    vectors[P, 0] = -mat.Z_f * scale
    vectors[P, 1] = mat.Z_f * scale
    vectors[Q1:, 0] = n * scale
    vectors[Q1:, 1] = n * scale
    speeds = np.array([-mat.c, mat.c])
    E = energy_matrix(mat).E
    return EigenBasis(
        speeds=speeds,
        vectors=vectors,
        families=("Acoustic", "Acoustic"),
        sides=("left", "right"),
        Er=E @ vectors,
    )


def _resplit_degenerate_pair(r: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Re-mixes two E-orthonormal vectors of a degenerate shear pair.

    Returns the pair (columns) with the first maximizing the absolute
    solid-velocity projection on ref; E-orthonormality is preserved
    because the mix is a plane rotation.
    """
    pa = r[V1:V1 + 3, 0] @ ref
    pb = r[V1:V1 + 3, 1] @ ref
    norm = np.hypot(pa, pb)
    if norm < 1e-30:
        return r
    ca, cb = pa / norm, pb / norm
    out = np.empty_like(r)
    out[:, 0] = ca * r[:, 0] + cb * r[:, 1]
    out[:, 1] = -cb * r[:, 0] + ca * r[:, 1]
    return out


def _poro_basis_principal(mat: PoroelasticDerived, n: np.ndarray) -> tuple:
    """Speeds and vectors in principal axes for one unit direction."""
    E, E_half, E_mhalf = _energy_roots(mat)
    A = assemble_poro(mat, n).A_breve
    M_sym = E_half @ A @ E_mhalf
    M_sym = 0.5 * (M_sym + M_sym.T)
    s, W = np.linalg.eigh(M_sym)

    s_max = np.max(np.abs(s))
    nonzero = np.abs(s) > _NULL_SPACE_RTOL * s_max
    if np.count_nonzero(nonzero) != 8:
        raise ValueError(
            f"decomposition failed (material {mat.name!r}, direction {n}): "
            f"expected 8 propagating modes, found {np.count_nonzero(nonzero)}"
        )
    # eigh returns ascending order, which is exactly the left-to-right
    # wave ordering; the kernel sits in the middle.
    speeds = s[nonzero]
    r = E_mhalf @ W[:, nonzero]

    # Shear ties: re-split each side's degenerate 2-space against the
    # axis least parallel to n, then the S1 label goes to the vector
    # with the larger projection (the first of the re-split pair).
    ref = np.zeros(3)
    ref[int(np.argmin(np.abs(n)))] = 1.0
    for a, b in ((1, 2), (5, 6)):
        gap = abs(abs(speeds[a]) - abs(speeds[b]))
        if gap <= _SHEAR_TIE_RTOL * s_max:
            pair = _resplit_degenerate_pair(r[:, [a, b]], ref)
            if a == 1:
                # Left block lists S1 before S2.
                r[:, a], r[:, b] = pair[:, 0], pair[:, 1]
            else:
                # Right block ascends SlowP, S2, S1, so S1 is column b.
                r[:, b], r[:, a] = pair[:, 0], pair[:, 1]
    return speeds, r


def eigendecompose(spec: MaterialSpec, n_global) -> EigenBasis:
    """Computes the wave basis of a material along a global direction.

    For poroelastic media the direction is rotated into principal axes,
    the symmetric eigenproblem is solved there, and the vectors are
    rotated back to global axes.  For fluids the closed-form acoustic
    pair is returned directly.

    When the material is transversely isotropic in its 1-2 axes the
    principal-frame problem is solved in a canonical frame with
    |n_1| >= |n_2| (axes 1 and 2 swapped if needed, results swapped
    back).  The physics is unchanged by the swap; it pins down the
    floating-point path so that mirror-image directions produce exactly
    mirrored bases.

    Args:
        spec: Material plus principal-axes rotation.
        n_global: Unit direction in global axes.

    Returns:
        EigenBasis in global axes; 8 waves for poroelastic media, 2 for
        fluids.

    Raises:
        ValueError: "decomposition failed" with the direction and
            material id when the eigenproblem does not produce the
            expected mode structure.
    """
    n_global = np.asarray(n_global, dtype=float)
    mat = spec.material
    if isinstance(mat, FluidMaterial):
        return _fluid_basis(mat, n_global)

    rot = spec.rotation
    n_mat = n_global if rot.is_identity else rot.R.T @ n_global

    swap = _is_transverse_12(mat.base) and abs(n_mat[0]) < abs(n_mat[1])
    n_solve = n_mat[[1, 0, 2]] if swap else n_mat
    speeds, r = _poro_basis_principal(mat, n_solve)
    if swap:
        r = r[_SWAP12, :]

    E = _energy_roots(mat)[0]
    Er = E @ r
    if not rot.is_identity:
        T = state_rotation_matrix(rot)
        T_inv = state_rotation_matrix(rot, inverse=True)
        r = T @ r
        Er = T_inv.T @ Er

    families = ("FastP", "S1", "S2", "SlowP", "SlowP", "S2", "S1", "FastP")
    sides = ("left",) * 4 + ("right",) * 4
    return EigenBasis(
        speeds=speeds, vectors=r, families=families, sides=sides, Er=Er,
    )
