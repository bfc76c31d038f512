"""YAML run configurations.

A config file names one problem and its parameters; everything is
validated before any grid or state is allocated.  All physical values
are SI (meters, seconds, Pa, kg).  The shape:

    problem: case            # case | converge | limiter-study | demo | box
    case: {id: 0, n: 20}
    converge: {id: 0, resolutions: [20, 40, 80]}
    limiter-study: {n: 50}
    demo: {nx: 60, ny: 60, nz: 120, viscous: true}
    output: {dir: out, formats: [vtk], snapshot_every: 0}

The "box" problem describes a single custom run in full: mapping,
dims, material (built-in name or property set), initial condition
(zero, plane-wave, or pulse), boundaries, limiter, cfl, t_end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import yaml

from porowave import harness
from porowave.grid import (
    UniformPartition,
    scaled_box_mapping,
    tilt_mapping,
    undulating_bed_mapping,
)
from porowave.limiter import PHI_BY_NAME, LimiterChoice, StrengthRatio
from porowave.materials import (
    BRINE,
    SANDSTONE,
    FluidMaterial,
    MaterialSpec,
    PoroelasticBase,
    derive_poroelastic,
    rotation_from_angles,
)
from porowave.planewave import PlaneWaveSpec, build_plane_wave
from porowave.solver import (
    AnalyticFill,
    Boundaries,
    Extrapolate0,
    ReflectX,
    ReflectY,
)


class ConfigError(ValueError):
    """A problem with the run configuration file."""


PROBLEM_KINDS = ("case", "converge", "limiter-study", "demo", "box")


@dataclass(frozen=True)
class OutputSettings:
    dir: str = "out"
    formats: tuple[str, ...] = ("vtk",)
    snapshot_every: int = 0


@dataclass(frozen=True)
class RunRequest:
    """Validated contents of a config file, not yet built."""

    kind: str
    params: dict
    output: OutputSettings


def load_config(path) -> RunRequest:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping of sections")
    return validate_config(raw)


def validate_config(raw: dict) -> RunRequest:
    kind = raw.get("problem")
    if kind not in PROBLEM_KINDS:
        raise ConfigError(f"problem must be one of {PROBLEM_KINDS}, "
                          f"got {kind!r}")
    known = {"problem", "output", kind}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"unknown top-level sections {sorted(extra)} "
                          f"for problem {kind!r}")
    section = raw.get(kind)
    if section is None:
        section = {}
    if not isinstance(section, dict):
        raise ConfigError(f"section {kind!r} must be a mapping")

    validator = _VALIDATORS[kind]
    params = validator(dict(section))
    output = _validate_output(raw.get("output") or {})
    return RunRequest(kind=kind, params=params, output=output)


def _validate_output(section) -> OutputSettings:
    if not isinstance(section, dict):
        raise ConfigError("output section must be a mapping")
    extra = set(section) - {"dir", "formats", "snapshot_every"}
    if extra:
        raise ConfigError(f"unknown output keys {sorted(extra)}")
    formats = tuple(section.get("formats", ("vtk",)))
    for fmt in formats:
        if fmt not in ("vtk", "csv-slice"):
            raise ConfigError(f"unknown output format {fmt!r}")
    every = section.get("snapshot_every", 0)
    if not isinstance(every, int) or every < 0:
        raise ConfigError("snapshot_every must be a non-negative integer")
    return OutputSettings(dir=str(section.get("dir", "out")),
                          formats=formats, snapshot_every=every)


def _require_int(section, key, lo, hi=None):
    v = section.pop(key, None)
    if not isinstance(v, int) or isinstance(v, bool):
        raise ConfigError(f"{key} must be an integer, got {v!r}")
    if v < lo or (hi is not None and v > hi):
        span = f">= {lo}" if hi is None else f"in {lo}..{hi}"
        raise ConfigError(f"{key} must be {span}, got {v}")
    return v


def _no_extras(section, where):
    if section:
        raise ConfigError(f"unknown keys {sorted(section)} in {where}")


def _validate_case(section):
    cid = _require_int(section, "id", 0, len(harness.CASE_TABLE) - 1)
    n = _require_int(section, "n", 4)
    _no_extras(section, "case")
    return {"id": cid, "n": n}


def _validate_converge(section):
    cid = _require_int(section, "id", 0, len(harness.CASE_TABLE) - 1)
    res = section.pop("resolutions", None)
    if (not isinstance(res, (list, tuple)) or len(res) < 2
            or not all(isinstance(n, int) and n >= 4 for n in res)):
        raise ConfigError("resolutions must list at least two integers >= 4")
    _no_extras(section, "converge")
    return {"id": cid, "resolutions": tuple(res)}


def _validate_limiter_study(section):
    n = _require_int(section, "n", 4) if "n" in section else 50
    _no_extras(section, "limiter-study")
    return {"n": n}


def _validate_demo(section):
    dims = (_require_int(section, "nx", 1),
            _require_int(section, "ny", 1),
            _require_int(section, "nz", 1))
    viscous = section.pop("viscous", True)
    if not isinstance(viscous, bool):
        raise ConfigError(f"viscous must be true or false, got {viscous!r}")
    _no_extras(section, "demo")
    return {"dims": dims, "viscous": viscous}


# --- the custom "box" problem ------------------------------------------------

_TI_KEYS = ("K_s", "rho_s", "c11", "c12", "c13", "c33", "c55", "phi",
            "kappa1", "kappa3", "T1", "T3", "K_f", "rho_f", "eta")


def _validate_material(section) -> MaterialSpec:
    if not isinstance(section, dict):
        raise ConfigError("material must be a mapping")
    section = dict(section)
    angles = section.pop("angles", None)
    rotation = None
    if angles is not None:
        if not (isinstance(angles, (list, tuple)) and len(angles) == 3):
            raise ConfigError("material angles must be [yaw, pitch, roll] "
                              "in degrees")
        rotation = rotation_from_angles(*(math.radians(a) for a in angles))

    name = section.pop("name", None)
    if name is not None:
        builtin = {"sandstone": SANDSTONE, "brine": BRINE}.get(name)
        if builtin is None:
            raise ConfigError(f"unknown material name {name!r}; built-ins "
                              "are 'sandstone' and 'brine'")
        eta = section.pop("eta", None)
        _no_extras(section, f"material {name!r}")
        mat = builtin
        if eta is not None:
            if name != "sandstone":
                raise ConfigError("eta override applies to poroelastic "
                                  "materials only")
            import dataclasses
            mat = derive_poroelastic(
                dataclasses.replace(SANDSTONE.base, eta=float(eta)))
        material = mat
    elif section.get("kind") == "fluid":
        section.pop("kind")
        try:
            material = FluidMaterial(K_f=float(section.pop("K_f")),
                                     rho_f=float(section.pop("rho_f")),
                                     name=str(section.pop("label", "fluid")))
        except KeyError as exc:
            raise ConfigError(f"fluid material needs {exc}") from exc
        _no_extras(section, "fluid material")
    else:
        missing = [k for k in _TI_KEYS if k not in section]
        if missing:
            raise ConfigError(
                "custom poroelastic material is missing keys "
                f"{missing}; provide a built-in 'name' instead, or "
                "kind: fluid with K_f and rho_f")
        label = str(section.pop("label", "custom"))
        kwargs = {k: section.pop(k) for k in _TI_KEYS}
        try:
            base = PoroelasticBase.transversely_isotropic(
                name=label, **{k: float(v) for k, v in kwargs.items()})
            material = derive_poroelastic(base)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad material properties: {exc}") from exc
        _no_extras(section, "custom material")
    if rotation is None:
        return MaterialSpec(material)
    return MaterialSpec(material, rotation)


def _validate_mapping(section):
    if not isinstance(section, dict):
        raise ConfigError("mapping must be a mapping section")
    section = dict(section)
    kind = section.pop("kind", "scaled-box")
    if kind == "scaled-box":
        edge = section.pop("edge", 1.0)
        angles = section.pop("angles", None)
        _no_extras(section, "scaled-box mapping")
        rot = None
        if angles is not None:
            rot = rotation_from_angles(*(math.radians(a) for a in angles))
        return scaled_box_mapping(edge, rotation=rot)
    if kind == "tilt":
        edge = section.pop("edge", 1.0)
        sigma = section.pop("sigma", 0.1)
        _no_extras(section, "tilt mapping")
        return tilt_mapping(float(edge), sigma=float(sigma))
    if kind == "undulating-bed":
        overrides = section.pop("overrides", {})
        _no_extras(section, "undulating-bed mapping")
        return undulating_bed_mapping(**{k: float(v)
                                         for k, v in overrides.items()})
    raise ConfigError(f"unknown mapping kind {kind!r}")


_BC_NAMES = ("reflect", "extrapolate", "analytic")


def _validate_boundaries(section, oracle):
    if section is None:
        section = {}
    if not isinstance(section, dict):
        raise ConfigError("boundaries must be a mapping with x, y, z")
    section = dict(section)
    pairs = {}
    reflect_by_axis = {"x": ReflectX, "y": ReflectY}
    for axis in ("x", "y", "z"):
        pair = section.pop(axis, ["extrapolate", "extrapolate"])
        if isinstance(pair, str):
            pair = [pair, pair]
        if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
            raise ConfigError(f"boundaries.{axis} must name two sides")
        built = []
        for side in pair:
            if side not in _BC_NAMES:
                raise ConfigError(f"unknown boundary {side!r}; choose from "
                                  f"{_BC_NAMES}")
            if side == "reflect":
                if axis == "z":
                    raise ConfigError("reflecting boundaries exist for x "
                                      "and y only")
                built.append(reflect_by_axis[axis]())
            elif side == "extrapolate":
                built.append(Extrapolate0())
            else:
                if oracle is None:
                    raise ConfigError(
                        "analytic boundaries require a plane-wave initial "
                        "condition to supply the oracle")
                built.append(AnalyticFill(solution=oracle))
        pairs[axis] = tuple(built)
    _no_extras(section, "boundaries")
    return Boundaries(x=pairs["x"], y=pairs["y"], z=pairs["z"])


def _validate_box(section):
    section = dict(section)
    mapping = _validate_mapping(section.pop("mapping", {}))
    dims = section.pop("dims", None)
    if not (isinstance(dims, (list, tuple)) and len(dims) == 3
            and all(isinstance(d, int) and d >= 1 for d in dims)):
        raise ConfigError("dims must be three positive integers")
    dims = tuple(dims)

    material = _validate_material(section.pop("material", {"name": "brine"}))
    partition = UniformPartition(material)

    init = section.pop("initial", {"kind": "zero"})
    if not isinstance(init, dict):
        raise ConfigError("initial must be a mapping with a kind")
    init = dict(init)
    ikind = init.pop("kind", "zero")
    oracle = None
    if ikind == "zero":
        _no_extras(init, "initial")
        initial = harness.ZeroStart()
    elif ikind == "plane-wave":
        ell = init.pop("ell", None)
        family = init.pop("family", None)
        freq = float(init.pop("frequency", harness.FREQUENCY))
        s = init.pop("polarization", None)
        _no_extras(init, "plane-wave initial")
        if not (isinstance(ell, (list, tuple)) and len(ell) == 3):
            raise ConfigError("plane-wave initial needs ell: [x, y, z]")
        norm = math.sqrt(sum(float(c) ** 2 for c in ell))
        if norm == 0.0:
            raise ConfigError("ell must be nonzero")
        ell = tuple(float(c) / norm for c in ell)
        try:
            sol = build_plane_wave(PlaneWaveSpec(
                material=material, ell=ell, omega=2.0 * math.pi * freq,
                family=family, s=None if s is None else tuple(s)))
        except ValueError as exc:
            raise ConfigError(f"bad plane-wave initial: {exc}") from exc
        oracle = sol
        initial = harness.PlaneWaveStart(sol)
    elif ikind == "pulse":
        if not material.is_fluid:
            raise ConfigError("pulse initial requires a fluid material")
        try:
            initial = harness.PulseStart(
                z_center=float(init.pop("z_center")),
                wavelength=float(init.pop("wavelength")),
                impedance=material.material.Z_f,
                amplitude=float(init.pop("amplitude", 1.0)))
        except KeyError as exc:
            raise ConfigError(f"pulse initial needs {exc}") from exc
        _no_extras(init, "pulse initial")
    else:
        raise ConfigError(f"unknown initial kind {ikind!r}")

    boundaries = _validate_boundaries(section.pop("boundaries", None), oracle)

    lim = section.pop("limiter", None) or {}
    if not isinstance(lim, dict):
        raise ConfigError("limiter must be a mapping")
    ratio = lim.get("ratio", StrengthRatio.E_FULL.value)
    function = lim.get("function", "mc")
    try:
        limiter = LimiterChoice.from_names(ratio, function)
    except (KeyError, ValueError) as exc:
        raise ConfigError(
            f"bad limiter (ratio one of "
            f"{[r.value for r in StrengthRatio]}, function one of "
            f"{sorted(PHI_BY_NAME)}): {exc}") from exc

    t_end = section.pop("t_end", None)
    if not isinstance(t_end, (int, float)) or t_end <= 0.0:
        raise ConfigError("t_end must be a positive time in seconds")
    cfl = float(section.pop("cfl", 0.9))
    if not 0.0 < cfl <= 1.0:
        raise ConfigError(f"cfl must lie in (0, 1], got {cfl}")
    eta_d = float(section.pop("eta_d", 1.0))
    if not 0.0 <= eta_d <= 1.0:
        raise ConfigError(f"eta_d must lie in [0, 1], got {eta_d}")
    sweep_order = section.pop("sweep_order", "xyz")
    if isinstance(sweep_order, list):
        sweep_order = tuple(sweep_order)
    if sweep_order not in ("xyz", "sym-xy") and (
            not isinstance(sweep_order, tuple)
            or sorted(sweep_order) != [0, 1, 2]):
        raise ConfigError("sweep_order must be 'xyz', 'sym-xy', or a "
                          "permutation of [0, 1, 2]")
    source = section.pop("source", True)
    if not isinstance(source, bool):
        raise ConfigError(f"source must be true or false, got {source!r}")
    name = str(section.pop("name", "box"))
    _no_extras(section, "box")

    return {
        "config": harness.SimulationConfig(
            name=name, mapping=mapping, dims=dims, partition=partition,
            boundaries=boundaries, initial=initial, t_end=float(t_end),
            limiter=limiter, cfl_target=cfl, eta_d=eta_d,
            sweep_order=sweep_order, apply_source=source, oracle=oracle,
            case_id=name),
    }


_VALIDATORS = {
    "case": _validate_case,
    "converge": _validate_converge,
    "limiter-study": _validate_limiter_study,
    "demo": _validate_demo,
    "box": _validate_box,
}


def simulation_for(request: RunRequest) -> harness.SimulationConfig:
    """The single simulation a request describes.

    Raises ConfigError for 'converge' and 'limiter-study', which run
    several simulations; the CLI handles those through the dedicated
    runners.
    """
    kind, p = request.kind, request.params
    out = request.output
    if kind == "case":
        config = harness.build_case(p["id"], p["n"])
    elif kind == "demo":
        config = harness.build_demo(p["dims"], viscous=p["viscous"])
    elif kind == "box":
        config = p["config"]
    else:
        raise ConfigError(f"problem {kind!r} describes a batch study, "
                          "not a single run")
    return _with_output(config, out)


def _with_output(config: harness.SimulationConfig,
                 out: OutputSettings) -> harness.SimulationConfig:
    from dataclasses import replace
    return replace(config, snapshot_every=out.snapshot_every,
                   formats=out.formats)


def grid_for(request: RunRequest):
    """Builds just the grid a request describes (for geometry checks)."""
    kind, p = request.kind, request.params
    if kind == "case":
        config = harness.build_case(p["id"], p["n"])
    elif kind == "converge":
        config = harness.build_case(p["id"], min(p["resolutions"]))
    elif kind == "limiter-study":
        config = harness.build_limiter_config("e-full", p["n"])
    elif kind == "demo":
        config = harness.build_demo(p["dims"], viscous=p["viscous"])
    else:
        config = p["config"]
    return config.build_grid()
