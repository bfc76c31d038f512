"""Analytic damped plane-wave solutions of the full viscous system.

A plane wave is sought in the form Q = Re[v exp(i(k l.x - omega t))]
with real angular frequency omega and complex wavenumber k.  In the
material principal frame the ansatz turns the governing system into a
small complex eigenproblem; energy scaling makes it well conditioned
and putting 1/k in the eigenvalue slot keeps the stationary modes
finite.  The resulting solutions serve as initial data, as boundary
data for analytic-fill ghost cells, and as the reference in
convergence measurements.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from porowave.materials import (
    MaterialSpec,
    energy_matrix,
    state_rotation_matrix,
)
from porowave.system import assemble_poro, eigendecompose

__all__ = ["PlaneWaveSpec", "PlaneWaveSolution", "build_plane_wave",
           "evaluate"]

PORO_FAMILIES = ("FastP", "S1", "S2", "SlowP")
_SHEAR = ("S1", "S2")

# Relative gap below which two branch speeds count as equal.  Kept well
# under the eigenpair residual tolerance: a degenerate shear pair is
# recombined with the averaged wavenumber, which perturbs the residual
# by about half the pair's wavenumber gap.
_SPEED_TIE_RTOL = 1e-10
_NULL_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class PlaneWaveSpec:
    """Requested plane wave: direction, frequency, family, material.

    Attributes:
        material: Propagation medium with its axes rotation.
        ell: Unit propagation direction in global (grid) axes.
        omega: Angular frequency (rad/s), > 0.
        family: FastP, S1, S2, or SlowP; Acoustic for a fluid.
        s: Unit shear polarization direction (global axes); required
            when a shear family is requested in a degenerate plane.
    """

    material: MaterialSpec
    ell: np.ndarray
    omega: float
    family: str
    s: np.ndarray | None = None

    def __post_init__(self):
        ell = np.asarray(self.ell, dtype=float)
        if not np.isclose(np.linalg.norm(ell), 1.0, rtol=0, atol=1e-12):
            raise ValueError("ell must be a unit vector")
        object.__setattr__(self, "ell", ell)
        if self.s is not None:
            s = np.asarray(self.s, dtype=float)
            if not np.isclose(np.linalg.norm(s), 1.0, rtol=0, atol=1e-12):
                raise ValueError("s must be a unit vector")
            object.__setattr__(self, "s", s)
        if self.omega <= 0.0:
            raise ValueError("omega must be positive")
        allowed = ("Acoustic",) if self.material.is_fluid else PORO_FAMILIES
        if self.family not in allowed:
            raise ValueError(
                f"family {self.family!r} not available in material "
                f"{self.material.name!r}; options are {allowed}")


@dataclass(frozen=True, eq=False)
class PlaneWaveSolution:
    """One plane-wave eigenpair, in global axes.

    The eigenvector has unit E-norm (conjugated on the left) and its
    phase is fixed so the reference-direction velocity component is
    real positive.
    """

    k: complex
    v: np.ndarray           # (13,) complex
    ell: np.ndarray         # (3,) global axes
    omega: float
    family: str

    @property
    def wavelength(self) -> float:
        return 2.0 * np.pi / abs(self.k.real)

    @property
    def decay_length(self) -> float:
        return 1.0 / self.k.imag if self.k.imag != 0.0 else np.inf

    @property
    def phase_speed(self) -> float:
        return self.omega / abs(self.k.real)


def _symmetrized_pencil(mat: MaterialSpec, ell_m: np.ndarray, omega: float):
    """Returns (A_sym, B, E, E_mhalf, A_breve, D) in the material frame."""
    sysm = assemble_poro(mat.material, ell_m)
    E = energy_matrix(mat).E
    w, U = np.linalg.eigh(E)
    if w[0] <= 0.0:
        raise ValueError(
            f"energy matrix of material {mat.name!r} is not positive-definite")
    E_half = (U * np.sqrt(w)) @ U.T
    E_mhalf = (U / np.sqrt(w)) @ U.T
    A_sym = E_half @ sysm.A_breve @ E_mhalf
    D_sym = E_half @ sysm.D @ E_mhalf
    B = omega * np.eye(13) - 1j * D_sym
    return A_sym, B, E, E_mhalf, sysm.A_breve, sysm.D


def build_plane_wave(spec: PlaneWaveSpec) -> PlaneWaveSolution:
    """Solves the plane-wave eigenproblem and selects the wanted branch.

    Branch selection keeps Re(k) > 0 with Im(k) >= 0, so the wave
    travels and decays in the +ell direction.  Among those branches the
    family is identified by phase speed ordering; a degenerate shear
    pair is resolved by maximizing the solid-velocity projection on the
    requested polarization direction.

    Raises:
        ValueError: "ambiguous family" when phase-speed ordering cannot
            separate the requested non-shear family, or a degenerate
            shear request lacks a polarization direction.
    """
    mat = spec.material
    if mat.is_fluid:
        # the acoustic branch is available in closed form: an inviscid
        # fluid has k = omega / c exactly, and the closed-form basis
        # vector already carries unit E-norm and the phase convention
        # (its velocity is ell / sqrt(2 rho_f), real positive along ell)
        basis = eigendecompose(mat, spec.ell)
        return PlaneWaveSolution(
            k=complex(spec.omega / mat.material.c),
            v=basis.vectors[:, 1].astype(complex),
            ell=spec.ell, omega=spec.omega, family="Acoustic")

    rot = mat.rotation
    ell_m = rot.R.T @ spec.ell
    s_m = rot.R.T @ spec.s if spec.s is not None else None
    omega = spec.omega

    A_sym, B, E_m, E_mhalf, A_breve, D = _symmetrized_pencil(
        mat, ell_m, omega)
    mu, W = scipy.linalg.eig(A_sym, B)

    keep = np.abs(mu) > _NULL_RTOL * np.max(np.abs(mu))
    k_all = 1.0 / mu[keep]
    vecs = E_mhalf @ W[:, keep]
    forward = k_all.real > 0.0
    k_fwd = k_all[forward]
    v_fwd = vecs[:, forward]
    order = np.argsort(-(omega / k_fwd.real))  # fastest first
    k_fwd, v_fwd = k_fwd[order], v_fwd[:, order]
    speeds = omega / k_fwd.real

    vslots = slice(7, 10)

    if k_fwd.size != 4:
        raise ValueError(
            f"ambiguous family: expected four forward branches, found "
            f"{k_fwd.size}")
    tied = np.isclose(speeds[:, None], speeds[None, :],
                      rtol=_SPEED_TIE_RTOL, atol=0.0)
    if spec.family == "FastP":
        if tied[0, 1]:
            raise ValueError(
                "ambiguous family: fast P speed coincides with a "
                "shear speed")
        k, v = k_fwd[0], v_fwd[:, 0]
        ref = ell_m
    elif spec.family == "SlowP":
        if tied[2, 3]:
            raise ValueError(
                "ambiguous family: slow P speed coincides with a "
                "shear speed")
        k, v = k_fwd[3], v_fwd[:, 3]
        ref = ell_m
    else:
        if tied[1, 2]:
            if s_m is None:
                raise ValueError(
                    "shear polarization direction s is required when "
                    "the shear branches are degenerate")
            p1 = v_fwd[vslots, 1] @ s_m
            p2 = v_fwd[vslots, 2] @ s_m
            norm = np.hypot(abs(p1), abs(p2))
            if norm == 0.0:
                raise ValueError(
                    "ambiguous family: shear eigenspace has no "
                    "component along the requested polarization")
            k = 0.5 * (k_fwd[1] + k_fwd[2])
            v = (np.conj(p1) * v_fwd[:, 1]
                 + np.conj(p2) * v_fwd[:, 2]) / norm
        else:
            idx = 1 if spec.family == "S1" else 2
            k, v = k_fwd[idx], v_fwd[:, idx]
        ref = s_m
        if ref is None:
            # non-degenerate shear with no polarization given: use the
            # branch's own solid velocity direction
            ref = np.real(v[vslots])
            ref = ref / np.linalg.norm(ref)

    # unit E-norm, conjugate on the left
    v = v / np.sqrt(np.real(np.conj(v) @ (E_m @ v)))
    # phase: reference velocity projection real positive
    proj = v[vslots] @ ref
    if abs(proj) < 1e-13:
        raise ValueError(
            "ambiguous family: reference-direction velocity projection "
            "vanished")
    v = v * (np.conj(proj) / abs(proj))

    residual = np.linalg.norm(
        -1j * omega * v + 1j * k * (A_breve @ v) - D @ v)
    if residual > 1e-9 * omega * np.linalg.norm(v):
        raise ValueError(
            f"plane wave eigenpair residual {residual:.3e} exceeds "
            f"tolerance for family {spec.family}")

    T = state_rotation_matrix(rot)
    v_global = T @ v
    return PlaneWaveSolution(k=complex(k), v=v_global, ell=spec.ell,
                             omega=omega, family=spec.family)


def evaluate(sol: PlaneWaveSolution, x, t: float) -> np.ndarray:
    """Evaluates the plane wave at points x (..., 3) and time t.

    Returns the real part of the ansatz, shape (..., 13).
    """
    x = np.asarray(x, dtype=float)
    phase = np.exp(1j * (sol.k * (x @ sol.ell) - sol.omega * t))
    return np.real(np.multiply.outer(phase, sol.v))
