"""Normal Riemann solvers at cell faces.

Same-material faces decompose the jump by E-inner-product projection
onto the shared wave basis.  Faces between different media instead
solve a small linear system built from the physical interface
conditions: the unknowns are the strengths of the left-going waves of
the left medium and the right-going waves of the right medium, and the
equations require the two intermediate states to satisfy every
interface condition row.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from porowave.materials import FluidMaterial, MaterialSpec
from porowave.state import NSTATE
from porowave.system import EigenBasis

__all__ = [
    "InterfaceKind",
    "InterfaceSpec",
    "WaveSet",
    "build_interface_spec",
    "solve_same_material",
    "interface_matrices_poro_fluid",
    "interface_matrices_poro_poro",
    "interface_matrices",
    "InterfaceSolve",
    "build_interface_solve",
    "solve_interface",
]

ZETA = 0.5  # averaging weight for the interface normal flow rate

_COND_LIMIT = 1e12


class InterfaceKind(Enum):
    SAME_MATERIAL = "SameMaterial"
    PORO_PORO = "PoroPoro"
    PORO_FLUID = "PoroFluid"
    FLUID_PORO = "FluidPoro"


@dataclass(frozen=True, eq=False)
class InterfaceSpec:
    """Classification and coefficients of one material interface.

    Z_prime_l/Z_prime_r are the discharge-row coupling impedances
    (Pa s/m): both (1/2) Z_f (1-eta_d) for poro-poro, and the full
    Z_f (1-eta_d) on the porous side for poro-fluid contacts.
    """

    kind: InterfaceKind
    eta_d: float
    zeta_weight: float
    Z_prime_l: float
    Z_prime_r: float

    def __post_init__(self):
        if not 0.0 <= self.eta_d <= 1.0:
            raise ValueError("eta_d must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class WaveSet:
    """Waves and speed-weighted fluctuations of one Riemann problem."""

    speeds: np.ndarray      # (k,)
    W: np.ndarray           # (13, k) jump carried by each wave
    amdq: np.ndarray        # sum of s_p W_p over left-going waves
    apdq: np.ndarray        # sum of s_p W_p over right-going waves
    families: tuple[str, ...] | None = None
    n: np.ndarray | None = None


def _pore_fluid_impedance(spec: MaterialSpec) -> float:
    mat = spec.material
    if isinstance(mat, FluidMaterial):
        return mat.Z_f
    return float(np.sqrt(mat.base.K_f * mat.base.rho_f))


def build_interface_spec(left: MaterialSpec, right: MaterialSpec,
                         eta_d: float) -> InterfaceSpec:
    """Classifies a face between two media and fixes its coefficients."""
    if left.is_fluid and right.is_fluid:
        raise ValueError("fluid-fluid faces are same-material by assumption")
    if left.is_fluid:
        kind = InterfaceKind.FLUID_PORO
        Z = left.material.Z_f
        zl, zr = 0.0, Z * (1.0 - eta_d)
    elif right.is_fluid:
        kind = InterfaceKind.PORO_FLUID
        Z = right.material.Z_f
        zl, zr = Z * (1.0 - eta_d), 0.0
    else:
        kind = InterfaceKind.PORO_PORO
        Z = _pore_fluid_impedance(left)
        zl = (1.0 - ZETA) * Z * (1.0 - eta_d)
        zr = ZETA * Z * (1.0 - eta_d)
    return InterfaceSpec(kind=kind, eta_d=eta_d, zeta_weight=ZETA,
                         Z_prime_l=zl, Z_prime_r=zr)


# -----------------------------------------------------------------------------
# Same-material projection solve
# -----------------------------------------------------------------------------

def solve_same_material(Ql, Qr, basis: EigenBasis, E=None) -> WaveSet:
    """Projects the jump Qr - Ql onto the shared E-orthogonal basis.

    The strength of wave p is (r_p^T E dQ) / (r_p^T E r_p); any
    stationary (null-space) component of the jump produces no wave.
    """
    dQ = np.asarray(Qr, dtype=float) - np.asarray(Ql, dtype=float)
    Er = basis.Er if E is None else E @ basis.vectors
    denom = np.einsum("ip,ip->p", basis.vectors, Er)
    alpha = (Er.T @ dQ) / denom
    W = basis.vectors * alpha
    s = basis.speeds
    amdq = W[:, s < 0.0] @ s[s < 0.0]
    apdq = W[:, s > 0.0] @ s[s > 0.0]
    return WaveSet(speeds=s, W=W, amdq=amdq, apdq=apdq,
                   families=basis.families)


# -----------------------------------------------------------------------------
# Interface condition matrices (printed forms)
# -----------------------------------------------------------------------------

def _traction_rows(n) -> np.ndarray:
    """3x13 rows selecting the traction vector tau . n (Voigt layout)."""
    nx, ny, nz = n
    rows = np.zeros((3, NSTATE))
    rows[0, [0, 4, 5]] = nx, nz, ny
    rows[1, [1, 3, 5]] = ny, nz, nx
    rows[2, [2, 3, 4]] = nz, ny, nx
    return rows


def interface_matrices_poro_fluid(n, eta_d: float, Z_f: float):
    """Condition matrices for a porous-left / fluid-right face.

    Rows: total normal mass balance; three traction rows against the
    fluid pressure; the discharge row eta_d p - Z' q.n on the porous
    side against eta_d p on the fluid side, with Z' = Z_f (1 - eta_d).

    Args:
        n: Unit normal pointing from the porous medium into the fluid.
        eta_d: Interface discharge efficiency in [0, 1].
        Z_f: Acoustic impedance of the fluid medium.

    Returns:
        (C_l, C_r), each 5x13.
    """
    n = np.asarray(n, dtype=float)
    Zp = Z_f * (1.0 - eta_d)
    C_l = np.zeros((5, NSTATE))
    C_r = np.zeros((5, NSTATE))
    # normal mass balance: (v + q).n on the porous side = q.n in the fluid
    C_l[0, 7:10] = n
    C_l[0, 10:13] = n
    C_r[0, 10:13] = n
    # traction continuity against -p n
    C_l[1:4, :] = _traction_rows(n)
    C_r[1:4, 6] = -n
    # discharge row
    C_l[4, 6] = eta_d
    C_l[4, 10:13] = -Zp * n
    C_r[4, 6] = eta_d
    return C_l, C_r


def interface_matrices_poro_poro(n, eta_d: float, Z_f_left: float):
    """Condition matrices for a porous-porous face.

    Rows: three traction rows, three solid-velocity continuity rows,
    the normal-flux continuity row, and the discharge row with the
    zeta-weighted normal flow rate, Z'_l = (1-zeta) Z_f (1-eta_d) and
    Z'_r = zeta Z_f (1-eta_d).

    Args:
        n: Unit normal, left to right.
        eta_d: Interface discharge efficiency in [0, 1].
        Z_f_left: Pore-fluid impedance of the left medium.

    Returns:
        (C_l, C_r), each 8x13.
    """
    n = np.asarray(n, dtype=float)
    Zp_l = (1.0 - ZETA) * Z_f_left * (1.0 - eta_d)
    Zp_r = ZETA * Z_f_left * (1.0 - eta_d)
    C_l = np.zeros((8, NSTATE))
    C_r = np.zeros((8, NSTATE))
    C_l[0:3, :] = _traction_rows(n)
    C_r[0:3, :] = C_l[0:3, :]
    for i in range(3):
        C_l[3 + i, 7 + i] = 1.0
        C_r[3 + i, 7 + i] = 1.0
    C_l[6, 10:13] = n
    C_r[6, 10:13] = n
    C_l[7, 6] = eta_d
    C_l[7, 10:13] = -Zp_l * n
    C_r[7, 6] = eta_d
    C_r[7, 10:13] = Zp_r * n
    return C_l, C_r


def interface_matrices(spec: InterfaceSpec, n, left: MaterialSpec,
                       right: MaterialSpec):
    """Dispatches to the printed matrices, handling the fluid-left swap.

    A fluid-left face reuses the porous-left matrices with the normal
    negated and the sides exchanged.
    """
    if spec.kind is InterfaceKind.PORO_PORO:
        return interface_matrices_poro_poro(
            n, spec.eta_d, _pore_fluid_impedance(left))
    if spec.kind is InterfaceKind.PORO_FLUID:
        return interface_matrices_poro_fluid(
            n, spec.eta_d, right.material.Z_f)
    if spec.kind is InterfaceKind.FLUID_PORO:
        C_poro, C_fluid = interface_matrices_poro_fluid(
            -np.asarray(n, dtype=float), spec.eta_d, left.material.Z_f)
        return C_fluid, C_poro
    raise ValueError("same-material faces have no interface matrices")


# -----------------------------------------------------------------------------
# Interface Riemann solve
# -----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class InterfaceSolve:
    """Precomputed solve operator for one interface face.

    Wave strengths for states (Ql, Qr) are x = P_r Qr - P_l Ql; the
    first L entries are strengths of the left-going waves of the left
    medium, the rest of the right-going waves of the right medium.
    """

    speeds_left: np.ndarray   # (L,) negative
    speeds_right: np.ndarray  # (R,) positive
    R_L: np.ndarray           # (13, L)
    R_R: np.ndarray           # (13, R)
    P_l: np.ndarray           # (L+R, 13)
    P_r: np.ndarray           # (L+R, 13)
    n: np.ndarray
    families: tuple[str, ...]


def build_interface_solve(basis_l: EigenBasis, basis_r: EigenBasis,
                          spec: InterfaceSpec, n, left: MaterialSpec,
                          right: MaterialSpec,
                          face_index=None) -> InterfaceSolve:
    """Assembles and factors the interface linear system for one face.

    Raises:
        ValueError: "interface solve failed" with the face index when
            the (row-equilibrated) system is ill-conditioned.
    """
    n = np.asarray(n, dtype=float)
    left_going = basis_l.speeds < 0.0
    right_going = basis_r.speeds > 0.0
    R_L = basis_l.vectors[:, left_going]
    R_R = basis_r.vectors[:, right_going]
    C_l, C_r = interface_matrices(spec, n, left, right)

    M = np.concatenate([C_l @ R_L, C_r @ R_R], axis=1)
    scale = np.max(np.abs(M), axis=1)
    if np.any(scale == 0.0):
        raise ValueError(
            f"interface solve failed at face {face_index}: "
            "degenerate condition row"
        )
    M_eq = M / scale[:, None]
    cond = np.linalg.cond(M_eq)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise ValueError(
            f"interface solve failed at face {face_index}: "
            f"condition number {cond:.3e}"
        )
    M_inv = np.linalg.inv(M_eq)
    P_l = M_inv @ (C_l / scale[:, None])
    P_r = M_inv @ (C_r / scale[:, None])
    families = tuple(
        [f for f, lg in zip(basis_l.families, left_going) if lg]
        + [f for f, rg in zip(basis_r.families, right_going) if rg]
    )
    return InterfaceSolve(
        speeds_left=basis_l.speeds[left_going],
        speeds_right=basis_r.speeds[right_going],
        R_L=R_L, R_R=R_R, P_l=P_l, P_r=P_r, n=n, families=families,
    )


def solve_interface(Ql, Qr, solve: InterfaceSolve) -> WaveSet:
    """Solves one interface Riemann problem with a prebuilt operator.

    The left intermediate state is Ql plus the left-going waves, the
    right one Qr minus the right-going waves; both satisfy the
    interface conditions by construction of the linear system.
    """
    Ql = np.asarray(Ql, dtype=float)
    Qr = np.asarray(Qr, dtype=float)
    x = solve.P_r @ Qr - solve.P_l @ Ql
    L = solve.speeds_left.size
    alpha, beta = x[:L], x[L:]
    W = np.concatenate([solve.R_L * alpha, solve.R_R * beta], axis=1)
    speeds = np.concatenate([solve.speeds_left, solve.speeds_right])
    amdq = solve.R_L @ (solve.speeds_left * alpha)
    apdq = solve.R_R @ (solve.speeds_right * beta)
    return WaveSet(speeds=speeds, W=W, amdq=amdq, apdq=apdq,
                   families=solve.families, n=solve.n)
