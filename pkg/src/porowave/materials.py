"""Material parameter sets, derived coefficients, and energy matrices.

Poroelastic media are described by the low-frequency Biot model for an
orthotropic skeleton.  From the base parameters (grain bulk modulus K_s,
grain density rho_s, drained stiffness c_IJ, porosity phi, permeability
kappa_i, tortuosity T_i, and the saturating fluid's K_f, rho_f, eta) the
model derives:

    alpha_I = 1 - (1/(3 K_s)) * sum_J c_IJ            (I, J = 1..3)
    K*      = (1/9) * sum_IJ c_IJ                     (I, J = 1..3)
    M       = K_s / ((1 - K*/K_s) - phi (1 - K_s/K_f))
    c^u_IJ  = c_IJ + alpha_I alpha_J M
    rho     = (1 - phi) rho_s + phi rho_f
    m_i     = rho_f T_i / phi
    Delta_i = rho m_i - rho_f**2
    omega_c = min_i  eta phi / (rho_f T_i kappa_i)
    tau_d_i = Delta_i kappa_i / (rho eta)             (eta > 0 only)

Hyperbolicity requires Delta_i > 0.  The model is physically valid only
for angular frequencies below omega_c; a higher configured source
frequency produces a warning, not an error.

The energy density is the quadratic form (1/2) Q^T E Q with

    E_s = [[S, S a], [a^T S, 1/M + a^T S a]]   (S = drained compliance)
    E_v = [[rho I, rho_f I], [rho_f I, diag(m_i)]]

for poroelastic media, and the positive-semidefinite fluid analog with
1/K_f at the pressure slot and rho_f at the flux slots.
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass, field

import numpy as np

from porowave.state import NSTATE, VOIGT_PAIRS

__all__ = [
    "PoroelasticBase",
    "PoroelasticDerived",
    "FluidMaterial",
    "AxesRotation",
    "EnergyMatrix",
    "MaterialSpec",
    "derive_poroelastic",
    "energy_matrix",
    "rotation_from_angles",
    "rotation_from_surface_normal",
    "state_to_axes",
    "state_rotation_matrix",
    "SANDSTONE",
    "BRINE",
]


# =============================================================================
# Domain types
# =============================================================================

@dataclass(frozen=True, eq=False)
class PoroelasticBase:
    """Base parameters of an orthotropic poroelastic medium.

    Attributes:
        K_s: Bulk modulus of the matrix grains (Pa).
        rho_s: Grain density (kg/m^3).
        c11..c66: Drained stiffness entries in Voigt notation (Pa); the
            nine independent orthotropic constants.
        phi: Porosity, 0 < phi < 1.
        kappa: Permeability along each principal axis (m^2), length 3.
        T: Tortuosity along each principal axis (>= 1), length 3.
        K_f: Bulk modulus of the saturating fluid (Pa).
        rho_f: Fluid density (kg/m^3).
        eta: Fluid dynamic viscosity (kg/(m s)), >= 0.
        name: Optional identifier used in diagnostics.
    """

    K_s: float
    rho_s: float
    c11: float
    c12: float
    c13: float
    c22: float
    c23: float
    c33: float
    c44: float
    c55: float
    c66: float
    phi: float
    kappa: tuple[float, float, float]
    T: tuple[float, float, float]
    K_f: float
    rho_f: float
    eta: float
    name: str = ""

    def __post_init__(self) -> None:
        if not (0.0 < self.phi < 1.0):
            raise ValueError(f"porosity must lie in (0, 1), got {self.phi}")
        if min(self.K_s, self.rho_s, self.K_f, self.rho_f) <= 0.0:
            raise ValueError("moduli and densities must be positive")
        if self.eta < 0.0:
            raise ValueError("viscosity must be non-negative")
        if any(k <= 0.0 for k in self.kappa):
            raise ValueError("permeabilities must be positive")
        if any(t < 1.0 for t in self.T):
            raise ValueError("tortuosities must be >= 1")
        C = self.stiffness_matrix()
        try:
            np.linalg.cholesky(C)
        except np.linalg.LinAlgError as exc:
            raise ValueError(
                "singular stiffness: drained stiffness matrix is not "
                "symmetric positive-definite"
            ) from exc

    @classmethod
    def transversely_isotropic(
        cls,
        K_s: float,
        rho_s: float,
        c11: float,
        c12: float,
        c13: float,
        c33: float,
        c55: float,
        phi: float,
        kappa1: float,
        kappa3: float,
        T1: float,
        T3: float,
        K_f: float,
        rho_f: float,
        eta: float,
        name: str = "",
    ) -> "PoroelasticBase":
        """Builds a transversely isotropic medium (1-2 isotropy plane)."""
        return cls(
            K_s=K_s, rho_s=rho_s,
            c11=c11, c12=c12, c13=c13,
            c22=c11, c23=c13, c33=c33,
            c44=c55, c55=c55, c66=0.5 * (c11 - c12),
            phi=phi,
            kappa=(kappa1, kappa1, kappa3),
            T=(T1, T1, T3),
            K_f=K_f, rho_f=rho_f, eta=eta,
            name=name,
        )

    def stiffness_matrix(self) -> np.ndarray:
        """Returns the drained stiffness as a symmetric 6x6 Voigt matrix."""
        C = np.zeros((6, 6))
        C[0, 0], C[1, 1], C[2, 2] = self.c11, self.c22, self.c33
        C[0, 1] = C[1, 0] = self.c12
        C[0, 2] = C[2, 0] = self.c13
        C[1, 2] = C[2, 1] = self.c23
        C[3, 3], C[4, 4], C[5, 5] = self.c44, self.c55, self.c66
        return C


@dataclass(frozen=True, eq=False)
class PoroelasticDerived:
    """Derived coefficients of a poroelastic medium.

    Attributes:
        base: The defining base parameter set.
        alpha: Effective stress coefficients (alpha_1..3); the shear
            entries alpha_4..6 are structural zeros in principal axes.
        M: Bulk coupling modulus (Pa).
        K_star: Bulk stiffness K* (Pa).
        c_u: Undrained stiffness, 6x6 Voigt matrix (Pa).
        rho: Bulk density (kg/m^3).
        m: Fluid inertia per axis (kg/m^3).
        Delta: rho*m_i - rho_f^2 per axis (kg^2/m^6).
        omega_c: Critical angular frequency (rad/s); inf when eta == 0.
        tau_d: Per-axis dissipation time constants (s); None when eta == 0.
    """

    base: PoroelasticBase
    alpha: np.ndarray
    M: float
    K_star: float
    c_u: np.ndarray
    rho: float
    m: np.ndarray
    Delta: np.ndarray
    omega_c: float
    tau_d: np.ndarray | None

    @property
    def is_fluid(self) -> bool:
        return False

    @property
    def name(self) -> str:
        return self.base.name


@dataclass(frozen=True, eq=False)
class FluidMaterial:
    """An inviscid fluid medium treated as degenerate poroelasticity.

    tau and v are identically zero in fluid cells; p carries the fluid
    pressure and q the fluid velocity.

    Attributes:
        K_f: Bulk modulus (Pa).
        rho_f: Density (kg/m^3).
        Z_f: Acoustic impedance sqrt(K_f rho_f) (Pa s/m), computed.
        c: Sound speed sqrt(K_f/rho_f) (m/s), computed.
        name: Optional identifier used in diagnostics.
    """

    K_f: float
    rho_f: float
    Z_f: float = field(init=False)
    c: float = field(init=False)
    name: str = ""

    def __post_init__(self) -> None:
        if self.K_f <= 0.0 or self.rho_f <= 0.0:
            raise ValueError("fluid K_f and rho_f must be positive")
        object.__setattr__(self, "Z_f", float(np.sqrt(self.K_f * self.rho_f)))
        object.__setattr__(self, "c", float(np.sqrt(self.K_f / self.rho_f)))

    @property
    def is_fluid(self) -> bool:
        return True


@dataclass(frozen=True, eq=False)
class AxesRotation:
    """Rotation from material principal axes to global axes.

    Attributes:
        R: 3x3 orthonormal matrix with det +1.  Columns are the principal
            axes expressed in global coordinates.
        angles: (yaw, pitch, roll) in radians when constructed from
            angles, else None.
    """

    R: np.ndarray
    angles: tuple[float, float, float] | None = None

    def __post_init__(self) -> None:
        R = np.asarray(self.R, dtype=float)
        object.__setattr__(self, "R", R)
        if R.shape != (3, 3):
            raise ValueError("rotation matrix must be 3x3")
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-12):
            raise ValueError("rotation matrix is not orthonormal")
        if np.linalg.det(R) < 0.0:
            raise ValueError("rotation matrix must have det +1")

    @property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.R, np.eye(3)))


IDENTITY_ROTATION = AxesRotation(R=np.eye(3), angles=(0.0, 0.0, 0.0))


@dataclass(frozen=True, eq=False)
class EnergyMatrix:
    """Energy quadratic form (1/2) Q^T E Q for one material.

    Attributes:
        E: Full 13x13 symmetric matrix (principal axes).
        E_s: 7x7 stress block.
        E_v: 6x6 velocity block.
        S: 6x6 drained compliance (zero matrix for fluids).
    """

    E: np.ndarray
    E_s: np.ndarray
    E_v: np.ndarray
    S: np.ndarray


@dataclass(frozen=True, eq=False)
class MaterialSpec:
    """A material together with the orientation of its principal axes.

    Attributes:
        material: Poroelastic derived set or fluid.
        rotation: Principal axes to global axes.  Irrelevant for fluids
            (isotropic) but carried for uniformity.
    """

    material: PoroelasticDerived | FluidMaterial
    rotation: AxesRotation = IDENTITY_ROTATION

    @property
    def is_fluid(self) -> bool:
        return self.material.is_fluid

    @property
    def name(self) -> str:
        return self.material.name


# =============================================================================
# Derivation of coefficients
# =============================================================================

def derive_poroelastic(base: PoroelasticBase) -> PoroelasticDerived:
    """Computes all derived coefficients of a poroelastic medium.

    Args:
        base: Validated base parameter set.

    Returns:
        A PoroelasticDerived with every field populated.

    Raises:
        ValueError: "degenerate inertia" if any Delta_i <= 0, or
            "singular stiffness" if the drained stiffness cannot be
            inverted to the compliance.
    """
    C = base.stiffness_matrix()
    if np.linalg.cond(C) > 1e12:
        raise ValueError(
            f"singular stiffness: condition number {np.linalg.cond(C):.3e} "
            "exceeds 1e12"
        )

    Cb = C[:3, :3]
    alpha = 1.0 - Cb.sum(axis=1) / (3.0 * base.K_s)
    K_star = Cb.sum() / 9.0
    M = base.K_s / ((1.0 - K_star / base.K_s)
                    - base.phi * (1.0 - base.K_s / base.K_f))
    if M <= 0.0:
        raise ValueError(f"bulk coupling modulus must be positive, got {M}")

    alpha6 = np.zeros(6)
    alpha6[:3] = alpha
    c_u = C + M * np.outer(alpha6, alpha6)

    rho = (1.0 - base.phi) * base.rho_s + base.phi * base.rho_f
    m = base.rho_f * np.asarray(base.T) / base.phi
    Delta = rho * m - base.rho_f ** 2
    if np.any(Delta <= 0.0):
        raise ValueError(
            f"degenerate inertia: Delta = {Delta} must be positive on every "
            "axis"
        )

    kappa = np.asarray(base.kappa)
    if base.eta > 0.0:
        omega_c = float(np.min(base.eta * base.phi / (base.rho_f
                                                      * np.asarray(base.T)
                                                      * kappa)))
        tau_d = Delta * kappa / (rho * base.eta)
    else:
        omega_c = np.inf
        tau_d = None

    return PoroelasticDerived(
        base=base, alpha=alpha, M=float(M), K_star=float(K_star), c_u=c_u,
        rho=float(rho), m=m, Delta=Delta, omega_c=omega_c, tau_d=tau_d,
    )


def check_source_frequency(mat: PoroelasticDerived, omega: float) -> None:
    """Warns when a source frequency exceeds the low-frequency limit."""
    if omega > mat.omega_c:
        warnings.warn(
            f"source angular frequency {omega:.4g} rad/s exceeds the "
            f"critical value {mat.omega_c:.4g} rad/s for material "
            f"'{mat.name}'; the low-frequency model is questionable here",
            stacklevel=2,
        )


# =============================================================================
# Energy matrices
# =============================================================================

def energy_matrix(
    mat: MaterialSpec | PoroelasticDerived | FluidMaterial,
) -> EnergyMatrix:
    """Assembles the 13x13 energy matrix of a material in principal axes.

    Args:
        mat: Material specification, poroelastic derived coefficients, or
            a fluid material.  The result is always expressed in the
            material's own principal axes, so any rotation in a
            MaterialSpec does not enter.

    Returns:
        EnergyMatrix with the full matrix and its blocks.

    Raises:
        ValueError: "singular stiffness" when the drained compliance of a
            poroelastic medium cannot be computed reliably.
    """
    if isinstance(mat, MaterialSpec):
        mat = mat.material
    E = np.zeros((NSTATE, NSTATE))
    if isinstance(mat, FluidMaterial):
        S = np.zeros((6, 6))
        E_s = np.zeros((7, 7))
        E_s[6, 6] = 1.0 / mat.K_f
        E_v = np.zeros((6, 6))
        E_v[3:, 3:] = mat.rho_f * np.eye(3)
    else:
        C = mat.base.stiffness_matrix()
        if np.linalg.cond(C) > 1e12:
            raise ValueError(
                "singular stiffness: drained compliance is unreliable "
                f"(cond {np.linalg.cond(C):.3e})"
            )
        S = np.linalg.inv(C)
        alpha6 = np.zeros(6)
        alpha6[:3] = mat.alpha
        Sa = S @ alpha6
        E_s = np.zeros((7, 7))
        E_s[:6, :6] = S
        E_s[:6, 6] = Sa
        E_s[6, :6] = Sa
        E_s[6, 6] = 1.0 / mat.M + alpha6 @ Sa
        E_v = np.zeros((6, 6))
        E_v[:3, :3] = mat.rho * np.eye(3)
        E_v[:3, 3:] = mat.base.rho_f * np.eye(3)
        E_v[3:, :3] = mat.base.rho_f * np.eye(3)
        E_v[3:, 3:] = np.diag(mat.m)
    E[:7, :7] = E_s
    E[7:, 7:] = E_v
    return EnergyMatrix(E=E, E_s=E_s, E_v=E_v, S=S)


# =============================================================================
# Rotations
# =============================================================================

def rotation_from_angles(yaw: float, pitch: float, roll: float) -> AxesRotation:
    """Builds the rotation R_z(yaw) R_y(-pitch) R_x(roll).

    Each elementary matrix rotates counterclockwise about its axis.

    Args:
        yaw: Rotation about z (radians).
        pitch: Rotation about y, applied with a negated angle (radians).
        roll: Rotation about x (radians).

    Returns:
        AxesRotation carrying the composed matrix and the input angles.
    """
    cz, sz = np.cos(yaw), np.sin(yaw)
    cy, sy = np.cos(-pitch), np.sin(-pitch)
    cx, sx = np.cos(roll), np.sin(roll)
    Rz = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
    Ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    Rx = np.array([[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]])
    return AxesRotation(R=Rz @ Ry @ Rx, angles=(yaw, pitch, roll))


def rotation_from_surface_normal(normal) -> AxesRotation:
    """Builds the minimal rotation taking z-hat to a unit surface normal.

    The rotation axis is z-hat x normal, so the material 1-2 axes end up
    spanning the tangent plane with no twist about the normal.

    Args:
        normal: Unit 3-vector.

    Returns:
        AxesRotation with R @ [0,0,1] = normal.

    Raises:
        ValueError: If the normal is (numerically) antiparallel to z-hat,
            where the minimal rotation is undefined.
    """
    n = np.asarray(normal, dtype=float)
    nz = n[2]
    if nz <= -1.0 + 1e-12:
        raise ValueError(
            "surface normal is antiparallel to the z axis; the minimal "
            "rotation is undefined there"
        )
    # Rodrigues form R = I + [a]x + [a]x^2 / (1 + c) with a = z-hat x n,
    # c = n_z; exact for unit n, no trig calls.
    a = np.array([-n[1], n[0], 0.0])
    K = np.array([
        [0.0, -a[2], a[1]],
        [a[2], 0.0, -a[0]],
        [-a[1], a[0], 0.0],
    ])
    R = np.eye(3) + K + (K @ K) / (1.0 + nz)
    return AxesRotation(R=R)


_VOIGT_I = np.array([i for i, _ in VOIGT_PAIRS])
_VOIGT_J = np.array([j for _, j in VOIGT_PAIRS])
_VOIGT_OFF = (_VOIGT_I != _VOIGT_J).astype(float)


@functools.lru_cache(maxsize=8192)
def _state_rotation_cached(key: bytes, inverse: bool) -> np.ndarray:
    R = np.frombuffer(key, dtype=float).reshape(3, 3)
    if inverse:
        R = R.T
    # Bond stress matrix B with (R tau R^T) in Voigt slots: for slots
    # s=(i,j), t=(a,b), B[s,t] = R_ia R_jb + [a != b] R_ib R_ja.
    I, J = _VOIGT_I, _VOIGT_J
    B = (R[np.ix_(I, I)] * R[np.ix_(J, J)]
         + R[np.ix_(I, J)] * R[np.ix_(J, I)] * _VOIGT_OFF[None, :])
    T = np.zeros((NSTATE, NSTATE))
    T[:6, :6] = B
    T[6, 6] = 1.0
    T[7:10, 7:10] = R
    T[10:13, 10:13] = R
    T.setflags(write=False)
    return T


def state_rotation_matrix(rot: AxesRotation, inverse: bool = False) -> np.ndarray:
    """Returns the 13x13 matrix T with T @ Q = state_to_axes(Q, rot, inverse).

    Assembled matrices are cached per rotation value: solver plans request
    the same rotation once per face, and layered partitions reuse one
    rotation for every cell in a column.
    """
    R = rot.R if isinstance(rot, AxesRotation) else np.asarray(rot, dtype=float)
    key = np.ascontiguousarray(R, dtype=float).tobytes()
    return _state_rotation_cached(key, bool(inverse)).copy()


def state_to_axes(Q, rot, inverse: bool = False):
    """Rotates state vectors between global and material principal axes.

    v and q transform as vectors, tau as a symmetric 3x3 tensor
    (R tau R^T), and p is unchanged.  With ``inverse=True`` the transpose
    rotation is applied, undoing the forward transform.

    Args:
        Q: Array of shape (..., 13).
        rot: An AxesRotation (forward maps principal -> global), or an
            array of rotation matrices with shape (..., 3, 3)
            broadcastable against the leading axes of Q.
        inverse: Apply R^T instead of R.

    Returns:
        Rotated array, same shape as Q.
    """
    Q = np.asarray(Q, dtype=float)
    R = rot.R if isinstance(rot, AxesRotation) else np.asarray(rot, dtype=float)
    if inverse:
        R = np.swapaxes(R, -1, -2)
    out = Q.copy()

    # Build the symmetric stress tensor from Voigt storage.
    tau = np.empty(Q.shape[:-1] + (3, 3))
    for slot, (i, j) in enumerate(VOIGT_PAIRS):
        tau[..., i, j] = Q[..., slot]
        tau[..., j, i] = Q[..., slot]
    tau = np.einsum("...ab,...bc,...dc->...ad", R, tau, R, optimize=True)
    for slot, (i, j) in enumerate(VOIGT_PAIRS):
        out[..., slot] = tau[..., i, j]

    out[..., 7:10] = np.einsum("...ab,...b->...a", R, Q[..., 7:10])
    out[..., 10:13] = np.einsum("...ab,...b->...a", R, Q[..., 10:13])
    return out


# =============================================================================
# Reference materials
# =============================================================================

SANDSTONE = derive_poroelastic(PoroelasticBase.transversely_isotropic(
    K_s=80e9, rho_s=2500.0,
    c11=71.8e9, c12=3.2e9, c13=1.2e9, c33=53.4e9, c55=26.1e9,
    phi=0.2,
    kappa1=600e-15, kappa3=100e-15,
    T1=2.0, T3=3.6,
    K_f=2.5e9, rho_f=1040.0, eta=1e-3,
    name="sandstone",
))
"""Brine-saturated transversely isotropic sandstone reference medium."""

BRINE = FluidMaterial(K_f=2.5e9, rho_f=1040.0, name="brine")
"""The brine from the reference sandstone as a standalone fluid."""
