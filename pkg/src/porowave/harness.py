"""Verification problems and batch runners.

This module holds everything above the solver: the 36 plane-wave
convergence cases, the tilted-grid limiter comparison, the undulating
bed demonstration problem, error norms against the analytic oracle,
and the executors the command line calls into.

The plane-wave cases come in nine groups of four, one wave family per
group member in decreasing speed order (FastP, S1, S2, SlowP).  Groups
vary the propagation direction (given in grid axes), an optional grid
rotation, and an optional material-axes rotation; the last group sends
the wave obliquely through an unrotated grid.  All cases use the
viscous reference sandstone driven at 10 kHz on a cube centered at the
origin, with analytic ghost fill on every boundary and no limiting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from porowave.grid import (
    GridMapping,
    MappedGrid,
    UndulatingBedPartition,
    UniformPartition,
    build_grid,
    scaled_box_mapping,
    tilt_mapping,
    undulating_bed_mapping,
)
from porowave.limiter import LimiterChoice, phi_mc
from porowave.materials import (
    BRINE,
    SANDSTONE,
    MaterialSpec,
    check_source_frequency,
    rotation_from_angles,
)
from porowave.planewave import (
    PlaneWaveSolution,
    PlaneWaveSpec,
    build_plane_wave,
    evaluate,
)
from porowave.solver import (
    AnalyticFill,
    Boundaries,
    Extrapolate0,
    ReflectX,
    ReflectY,
    RunInfo,
    Solver,
    StateField,
    TimeControls,
    state_from_solution,
    uniform_state,
)
from porowave.state import COMPONENT_NAMES

FREQUENCY = 1.0e4                 # driving frequency for all cases (Hz)
OMEGA = 2.0 * math.pi * FREQUENCY
FAMILY_ORDER = ("FastP", "S1", "S2", "SlowP")

_TABLE_ANGLES = (30.0, 20.0, 10.0)   # yaw, pitch, roll (degrees)
_OBLIQUE = (1.0 / math.sqrt(3.0),) * 3

# (ell in grid axes, grid angles, material angles) per group of four
_GROUPS = (
    ((1.0, 0.0, 0.0), None, None),
    ((0.0, 0.0, 1.0), None, None),
    ((1.0, 0.0, 0.0), _TABLE_ANGLES, None),
    ((0.0, 1.0, 0.0), _TABLE_ANGLES, None),
    ((0.0, 0.0, 1.0), _TABLE_ANGLES, None),
    ((1.0, 0.0, 0.0), None, _TABLE_ANGLES),
    ((0.0, 1.0, 0.0), None, _TABLE_ANGLES),
    ((0.0, 0.0, 1.0), None, _TABLE_ANGLES),
    (_OBLIQUE, None, None),
)


@dataclass(frozen=True)
class CaseDefinition:
    """One row of the plane-wave case table."""

    case_id: int
    ell_grid: tuple[float, float, float]
    grid_angles: tuple[float, float, float] | None    # degrees, or None
    material_angles: tuple[float, float, float] | None
    family: str
    polarization: tuple[float, float, float] | None = None

    @property
    def aligned_axis(self) -> int | None:
        """Grid axis the wave travels along, None when oblique."""
        nz = [i for i, c in enumerate(self.ell_grid) if c != 0.0]
        return nz[0] if len(nz) == 1 else None


def _case_table() -> tuple[CaseDefinition, ...]:
    rows = []
    for g, (ell, grid_ang, mat_ang) in enumerate(_GROUPS):
        for off, family in enumerate(FAMILY_ORDER):
            cid = 4 * g + off
            pol = None
            if cid == 5:
                pol = (1.0, 0.0, 0.0)
            elif cid == 6:
                pol = (0.0, 1.0, 0.0)
            rows.append(CaseDefinition(
                case_id=cid, ell_grid=ell, grid_angles=grid_ang,
                material_angles=mat_ang, family=family, polarization=pol))
    return tuple(rows)


CASE_TABLE = _case_table()


def _rotation(angles_deg):
    if angles_deg is None:
        return None
    return rotation_from_angles(*(math.radians(a) for a in angles_deg))


_FAST_P_REFERENCE_SPEED = None


def _fast_p_speed() -> float:
    """Phase speed of the 10 kHz fast P wave along material axis 1."""
    global _FAST_P_REFERENCE_SPEED
    if _FAST_P_REFERENCE_SPEED is None:
        sol = build_plane_wave(PlaneWaveSpec(
            material=MaterialSpec(SANDSTONE), ell=(1.0, 0.0, 0.0),
            omega=OMEGA, family="FastP"))
        _FAST_P_REFERENCE_SPEED = sol.phase_speed
    return _FAST_P_REFERENCE_SPEED


# -----------------------------------------------------------------------------
# Initial conditions
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class PlaneWaveStart:
    """Initial state sampled from an analytic plane wave at t = 0."""

    solution: PlaneWaveSolution

    def build(self, grid: MappedGrid) -> StateField:
        return state_from_solution(grid, self.solution)


@dataclass(frozen=True)
class PulseStart:
    """Downward-moving pressure pulse, one raised-cosine period tall.

    p = (amplitude/2) (1 + cos(2 pi (z - z_center)/wavelength)) inside
    |z - z_center| < wavelength/2, zero elsewhere; the vertical fluid
    velocity is q_z = -p/impedance so the pulse propagates in -z.
    """

    z_center: float
    wavelength: float
    impedance: float
    amplitude: float = 1.0

    def build(self, grid: MappedGrid) -> StateField:
        state = uniform_state(grid)
        z = grid.centroid[..., 2]
        arg = 2.0 * np.pi * (z - self.z_center) / self.wavelength
        p = np.where(np.abs(z - self.z_center) < 0.5 * self.wavelength,
                     0.5 * self.amplitude * (1.0 + np.cos(arg)), 0.0)
        state.Q[..., 6] = p
        state.Q[..., 12] = -p / self.impedance
        return state


@dataclass(frozen=True)
class ZeroStart:
    def build(self, grid: MappedGrid) -> StateField:
        return uniform_state(grid)


# -----------------------------------------------------------------------------
# Simulation configuration
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class SimulationConfig:
    """Complete, validated description of one run."""

    name: str
    mapping: GridMapping
    dims: tuple[int, int, int]
    partition: object
    boundaries: Boundaries
    initial: object
    t_end: float
    limiter: LimiterChoice = field(default_factory=lambda: LimiterChoice())
    cfl_target: float = 0.9
    eta_d: float = 1.0
    sweep_order: str | tuple[int, ...] = "xyz"
    apply_source: bool = True
    oracle: PlaneWaveSolution | None = None
    case_id: int | str | None = None
    snapshot_every: int = 0            # 0 = final state only
    formats: tuple[str, ...] = ("vtk",)

    def build_grid(self) -> MappedGrid:
        return build_grid(self.mapping, self.dims, partition=self.partition)


def build_case(case_id: int, n: int) -> SimulationConfig:
    """Configuration for one plane-wave case at n cells per edge.

    The domain edge is one wavelength (2 pi / |Re k|) for the fast P
    and shear families and one decay length (1 / |Im k|) for the slow
    P family; the simulation time is 1.25 wave periods, except slow P
    cases run for 1.25 domain crossings of the axis-1 fast P wave.
    """
    if not 0 <= case_id < len(CASE_TABLE):
        raise ValueError(f"case id must be in 0..{len(CASE_TABLE) - 1}, "
                         f"got {case_id}")
    if n < 4:
        raise ValueError(f"cells per edge must be at least 4, got {n}")
    case = CASE_TABLE[case_id]
    check_source_frequency(SANDSTONE, OMEGA)

    grid_rot = _rotation(case.grid_angles)
    mat_rot = _rotation(case.material_angles)
    spec = (MaterialSpec(SANDSTONE) if mat_rot is None
            else MaterialSpec(SANDSTONE, mat_rot))

    ell = np.asarray(case.ell_grid)
    if grid_rot is not None:
        ell = grid_rot.R @ ell
    sol = build_plane_wave(PlaneWaveSpec(
        material=spec, ell=ell, omega=OMEGA, family=case.family,
        s=case.polarization))

    if case.family == "SlowP":
        edge = sol.decay_length
        t_end = 1.25 * edge / _fast_p_speed()
    else:
        edge = sol.wavelength
        t_end = 1.25 * (2.0 * math.pi / OMEGA)

    return SimulationConfig(
        name=f"case-{case_id}",
        mapping=scaled_box_mapping(edge, rotation=grid_rot),
        dims=(n, n, n),
        partition=UniformPartition(spec),
        boundaries=Boundaries.uniform(
            AnalyticFill(solution=sol, aligned_axis=case.aligned_axis)),
        initial=PlaneWaveStart(sol),
        t_end=t_end,
        limiter=LimiterChoice(phi=None),
        oracle=sol,
        case_id=case_id,
    )


def build_limiter_config(ratio: str, n: int) -> SimulationConfig:
    """Case-5 wave on the split-tilt grid with MC and the given ratio.

    The grid's z surfaces tilt along x below the midplane and along y
    above it, which swaps the speed order of the two shear
    polarizations between the halves; the classical positional
    strength ratio then limits each shear wave against the wrong
    upwind partner while the energy ratios do not.
    """
    case = CASE_TABLE[5]
    check_source_frequency(SANDSTONE, OMEGA)
    spec = MaterialSpec(SANDSTONE)
    sol = build_plane_wave(PlaneWaveSpec(
        material=spec, ell=(0.0, 0.0, 1.0), omega=OMEGA, family=case.family,
        s=case.polarization))
    return SimulationConfig(
        name=f"limiter-{ratio}",
        mapping=tilt_mapping(sol.wavelength, sigma=0.1),
        dims=(n, n, n),
        partition=UniformPartition(spec),
        boundaries=Boundaries.uniform(AnalyticFill(solution=sol)),
        initial=PlaneWaveStart(sol),
        t_end=1.25 * (2.0 * math.pi / OMEGA),
        limiter=LimiterChoice.from_names(ratio, "mc"),
        oracle=sol,
        case_id=f"5-{ratio}",
    )


def build_demo(dims=(60, 60, 120), viscous: bool = True) -> SimulationConfig:
    """Acoustic pulse in brine striking the undulating sandstone bed.

    The bed's isotropy plane follows the surface tangent (per-cell
    axes from the centroid's surface normal), the interface is fully
    open (eta_d = 1), lateral boundaries are reflecting by symmetry,
    and top/bottom are zero-order extrapolation.  The inviscid variant
    reuses the same transport plans and skips the friction source.
    """
    dims = tuple(int(d) for d in dims)
    if any(d <= 0 for d in dims):
        raise ValueError(f"demo dims must be positive, got {dims}")
    check_source_frequency(SANDSTONE, OMEGA)
    mapping = undulating_bed_mapping()
    params = mapping.params
    lam = BRINE.c / FREQUENCY
    z_center = (params["z0"] + params["Hx"] + params["Hy"]) + 0.6 * lam
    return SimulationConfig(
        name="demo-viscous" if viscous else "demo-inviscid",
        mapping=mapping,
        dims=dims,
        partition=UndulatingBedPartition(params, SANDSTONE, BRINE),
        boundaries=Boundaries(
            x=(ReflectX(), ReflectX()),
            y=(ReflectY(), ReflectY()),
            z=(Extrapolate0(), Extrapolate0()),
        ),
        initial=PulseStart(z_center=z_center, wavelength=lam,
                           impedance=BRINE.Z_f),
        t_end=400.0e-6,
        limiter=LimiterChoice(phi=phi_mc),
        sweep_order="sym-xy",
        apply_source=viscous,
        case_id="demo",
    )


def demo_slice_index(grid: MappedGrid) -> int:
    """Interior z index of the highest cell layer below z_bot.

    Below the stretched region the mapping's constant-xi3 surfaces are
    horizontal planes, so this is the highest layer of sandstone cells
    whose centroids share one z coordinate.
    """
    params = grid.mapping.params
    layers = int(round(params["xi_bot"] * grid.dims[2]))
    if layers < 1:
        raise ValueError("grid too coarse: no full cell layer below z_bot")
    return layers - 1


# -----------------------------------------------------------------------------
# Error norms and convergence
# -----------------------------------------------------------------------------

def error_norms(grid: MappedGrid, state: StateField,
                sol: PlaneWaveSolution) -> tuple[dict, dict]:
    """Volume-weighted relative 1-norm and relative max-norm vs oracle.

    Both norms treat the 13 components as one stacked field; the
    second return value carries the same two norms split per component
    for diagnosis.  Sums run in index order, so repeated evaluation is
    bit-identical.
    """
    sl = grid.interior()
    ref = evaluate(sol, grid.centroid[sl], state.t)
    err = state.Q[sl] - ref
    V = grid.volume[sl][..., None]

    one = float(np.sum(V * np.abs(err)) / np.sum(V * np.abs(ref)))
    mx = float(np.max(np.abs(err)) / np.max(np.abs(ref)))
    stacked = {"1-norm": one, "max-norm": mx}

    ref_one = np.sum(V * np.abs(ref), axis=(0, 1, 2))
    ref_max = np.max(np.abs(ref), axis=(0, 1, 2))
    per_component = {}
    for c, name in enumerate(COMPONENT_NAMES):
        if ref_one[c] > 0.0:
            per_component[f"1-norm[{name}]"] = float(
                np.sum(V[..., 0] * np.abs(err[..., c])) / ref_one[c])
        if ref_max[c] > 0.0:
            per_component[f"max-norm[{name}]"] = float(
                np.max(np.abs(err[..., c])) / ref_max[c])
    return stacked, per_component


def fit_rate(resolutions, errors) -> float:
    """Least-squares slope of log(error) against log(N), negated."""
    return float(-np.polyfit(np.log(resolutions), np.log(errors), 1)[0])


@dataclass
class ErrorReport:
    """Error norms per resolution with fitted convergence rates."""

    case_id: int | str
    resolutions: tuple[int, ...]
    norms: dict[str, list[float]]
    rates: dict[str, float | None]
    per_component: list[dict[str, float]]

    def rows(self) -> list[tuple]:
        """(case, N, norm, value, rate) rows for report.csv."""
        out = []
        for norm, values in self.norms.items():
            rate = self.rates.get(norm)
            for N, v in zip(self.resolutions, values):
                out.append((self.case_id, N, norm, v, rate))
        for N, comps in zip(self.resolutions, self.per_component):
            for norm, v in comps.items():
                out.append((self.case_id, N, norm, v, None))
        return out


def run_config(config: SimulationConfig, out_dir=None,
               progress=None) -> tuple[MappedGrid, Solver, StateField, RunInfo]:
    """Builds and runs one configuration, optionally writing snapshots."""
    from porowave import output

    grid = config.build_grid()
    solver = Solver(grid, config.boundaries, limiter=config.limiter,
                    eta_d=config.eta_d, sweep_order=config.sweep_order)
    state = config.initial.build(grid)

    writer = None
    if out_dir is not None and config.snapshot_every > 0:
        def writer(st, step):
            if step % config.snapshot_every == 0:
                output.write_snapshots(grid, st, out_dir, step,
                                       formats=config.formats)
    if progress is not None:
        inner = writer

        def writer(st, step):
            progress(st, step)
            if inner is not None:
                inner(st, step)

    info = solver.run(state, TimeControls(t_end=config.t_end,
                                          cfl_target=config.cfl_target),
                      apply_source=config.apply_source, on_step=writer)
    state.validate()
    if out_dir is not None:
        every = config.snapshot_every
        if every <= 0 or info.n_steps % every != 0:
            output.write_snapshots(grid, state, out_dir, info.n_steps,
                                   formats=config.formats)
    return grid, solver, state, info


def run_convergence(case_id: int, resolutions, progress=None) -> ErrorReport:
    """Runs one case over the given resolutions and fits rates."""
    resolutions = tuple(int(n) for n in resolutions)
    if not resolutions:
        raise ValueError("at least one resolution is required")
    norms: dict[str, list[float]] = {"1-norm": [], "max-norm": []}
    per_component = []
    for n in resolutions:
        config = build_case(case_id, n)
        try:
            grid, _, state, info = run_config(config)
        except Exception as exc:
            raise RuntimeError(f"case {case_id} failed at N={n}: {exc}") from exc
        stacked, comps = error_norms(grid, state, config.oracle)
        for k, v in stacked.items():
            norms[k].append(v)
        per_component.append(comps)
        if progress is not None:
            progress(case_id, n, info, stacked)
    rates = {
        k: (fit_rate(resolutions, v) if len(resolutions) >= 2 else None)
        for k, v in norms.items()
    }
    return ErrorReport(case_id=case_id, resolutions=resolutions,
                       norms=norms, rates=rates, per_component=per_component)


def run_limiter_comparison(n: int = 50, resolutions=None,
                           progress=None) -> dict[str, ErrorReport]:
    """Classical vs full-energy strength ratio on the split-tilt grid."""
    resolutions = (n,) if resolutions is None else tuple(resolutions)
    out = {}
    for ratio in ("classical", "e-full"):
        norms: dict[str, list[float]] = {"1-norm": [], "max-norm": []}
        per_component = []
        for N in resolutions:
            config = build_limiter_config(ratio, N)
            grid, _, state, info = run_config(config)
            stacked, comps = error_norms(grid, state, config.oracle)
            for k, v in stacked.items():
                norms[k].append(v)
            per_component.append(comps)
            if progress is not None:
                progress(ratio, N, info, stacked)
        rates = {
            k: (fit_rate(resolutions, v) if len(resolutions) >= 2 else None)
            for k, v in norms.items()
        }
        out[ratio] = ErrorReport(case_id=f"5-{ratio}", resolutions=resolutions,
                                 norms=norms, rates=rates,
                                 per_component=per_component)
    return out


# -----------------------------------------------------------------------------
# Geometry audit
# -----------------------------------------------------------------------------

def geometry_check(grid: MappedGrid) -> dict:
    """Closed-surface and volume diagnostics over the interior cells.

    For every cell the outward area vectors of the six faces must sum
    to zero; the returned residual is the worst cell's |sum| divided
    by the largest face area on the grid.
    """
    sl = grid.interior()
    residual = np.zeros(grid.dims + (3,))
    max_area = 0.0
    for d in range(3):
        n = np.moveaxis(grid.face_normal[d], d, 0)
        A = np.moveaxis(grid.face_area[d], d, 0)
        g = grid.ghost
        tsl = [slice(g, g + grid.dims[ax]) for ax in range(3) if ax != d]
        n = n[:, tsl[0], tsl[1]]
        A = A[:, tsl[0], tsl[1]]
        lo = slice(g, g + grid.dims[d])
        hi = slice(g + 1, g + grid.dims[d] + 1)
        flux = n * A[..., None]
        contrib = np.moveaxis(flux[hi] - flux[lo], 0, d)
        residual += contrib
        max_area = max(max_area, float(A[lo].max()), float(A[hi].max()))
    worst = float(np.linalg.norm(residual, axis=-1).max())
    vol = grid.volume[sl]
    return {
        "cells": int(np.prod(grid.dims)),
        "closed_surface_residual": worst / max_area,
        "min_volume": float(vol.min()),
        "total_volume": grid.total_volume(),
        "max_face_area": max_area,
        "ok": bool(worst / max_area <= 1e-12 and vol.min() > 0.0),
    }
