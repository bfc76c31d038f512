"""Command-line front end."""

from __future__ import annotations

import os
import time

import click

from porowave import config as config_mod
from porowave import harness, output
from porowave.solver import total_energy


def _out_option(fn):
    return click.option("--out", "out_dir", default="out", show_default=True,
                        help="Directory for output files.")(fn)


@click.group()
def main():
    """Poroelastic/fluid wave propagation on mapped hexahedral grids."""


def _echo_norms(label, stacked):
    click.echo(f"{label}: 1-norm {stacked['1-norm']:.6e}  "
               f"max-norm {stacked['max-norm']:.6e}")


def _run_single(sim, out_dir, slice_index=None):
    os.makedirs(out_dir, exist_ok=True)
    t0 = time.perf_counter()
    last = {"t": t0}

    def progress(state, step):
        now = time.perf_counter()
        if now - last["t"] >= 30.0:
            last["t"] = now
            click.echo(f"  step {step}, t = {state.t:.6e} s "
                       f"({now - t0:.0f} s elapsed)")

    try:
        grid, solver, state, info = harness.run_config(
            sim, out_dir=out_dir, progress=progress)
    except Exception as exc:
        raise click.ClickException(f"{sim.name} failed: {exc}") from exc
    click.echo(f"{sim.name}: {info.n_steps} steps, dt = {info.dt:.6e} s, "
               f"cfl = {info.cfl:.3f}, wall {time.perf_counter() - t0:.1f} s")
    return grid, solver, state, info


def _report_single(sim, grid, state, out_dir):
    if sim.oracle is None:
        return
    stacked, comps = harness.error_norms(grid, state, sim.oracle)
    _echo_norms(sim.name, stacked)
    report = harness.ErrorReport(
        case_id=sim.case_id, resolutions=(sim.dims[0],),
        norms={k: [v] for k, v in stacked.items()},
        rates={k: None for k in stacked}, per_component=[comps])
    path = output.write_report(os.path.join(out_dir, "report.csv"), [report])
    click.echo(f"wrote {path}")


@main.command()
@click.argument("config_file", type=click.Path(exists=True, dir_okay=False))
@_out_option
def run(config_file, out_dir):
    """Run the problem described by a YAML config file."""
    try:
        request = config_mod.load_config(config_file)
    except config_mod.ConfigError as exc:
        raise click.ClickException(str(exc)) from exc
    if out_dir == "out" and request.output.dir:
        out_dir = request.output.dir
    kind, p = request.kind, request.params

    if kind == "converge":
        _converge(p["id"], p["resolutions"], out_dir)
    elif kind == "limiter-study":
        _limiter_study(p["n"], out_dir)
    else:
        try:
            sim = config_mod.simulation_for(request)
        except config_mod.ConfigError as exc:
            raise click.ClickException(str(exc)) from exc
        grid, _, state, _ = _run_single(sim, out_dir)
        if kind == "demo":
            _demo_outputs(sim, grid, state, out_dir)
        _report_single(sim, grid, state, out_dir)


@main.command()
@click.argument("case_id", type=click.IntRange(0, len(harness.CASE_TABLE) - 1))
@click.option("--n", type=click.IntRange(min=4), required=True,
              help="Cells per edge.")
@_out_option
def case(case_id, n, out_dir):
    """Run one plane-wave case at one resolution."""
    try:
        sim = harness.build_case(case_id, n)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    grid, _, state, _ = _run_single(sim, out_dir)
    _report_single(sim, grid, state, out_dir)


def _parse_resolutions(text):
    try:
        res = tuple(int(tok) for tok in text.replace(",", " ").split())
    except ValueError as exc:
        raise click.ClickException(
            f"bad resolution list {text!r}: {exc}") from exc
    if not res:
        raise click.ClickException("at least one resolution is required")
    return res


def _converge(case_id, resolutions, out_dir):
    os.makedirs(out_dir, exist_ok=True)

    def progress(cid, n, info, stacked):
        _echo_norms(f"case {cid} N={n} ({info.n_steps} steps)", stacked)

    try:
        report = harness.run_convergence(case_id, resolutions,
                                         progress=progress)
    except Exception as exc:
        raise click.ClickException(str(exc)) from exc
    for norm, rate in report.rates.items():
        if rate is not None:
            click.echo(f"case {case_id} fitted {norm} rate: {rate:.3f}")
    path = output.write_report(os.path.join(out_dir, "report.csv"), [report])
    click.echo(f"wrote {path}")
    png = output.plot_report(path, os.path.join(out_dir, "converge.png"))
    if png:
        click.echo(f"wrote {png}")


@main.command()
@click.argument("case_id", type=click.IntRange(0, len(harness.CASE_TABLE) - 1))
@click.option("--resolutions", default="20,40,80", show_default=True,
              help="Comma-separated cells per edge.")
@_out_option
def converge(case_id, resolutions, out_dir):
    """Convergence study of one case over several resolutions."""
    res = _parse_resolutions(resolutions)
    if len(res) < 2:
        raise click.ClickException("a convergence study needs at least "
                                   "two resolutions")
    _converge(case_id, res, out_dir)


def _limiter_study(n, out_dir):
    os.makedirs(out_dir, exist_ok=True)

    def progress(ratio, N, info, stacked):
        _echo_norms(f"{ratio} N={N} ({info.n_steps} steps)", stacked)

    try:
        reports = harness.run_limiter_comparison(n, progress=progress)
    except Exception as exc:
        raise click.ClickException(str(exc)) from exc
    classical = reports["classical"].norms["max-norm"][-1]
    efull = reports["e-full"].norms["max-norm"][-1]
    click.echo(f"max-norm at {n}^3: classical {classical:.6e}, "
               f"e-full {efull:.6e}, ratio {efull / classical:.3f}")
    path = output.write_report(os.path.join(out_dir, "report.csv"),
                               [reports["classical"], reports["e-full"]])
    click.echo(f"wrote {path}")
    png = output.plot_report(path, os.path.join(out_dir, "limiter.png"))
    if png:
        click.echo(f"wrote {png}")


@main.command(name="limiter-study")
@click.option("--n", type=click.IntRange(min=9), default=50,
              show_default=True, help="Cells per edge.")
@_out_option
def limiter_study(n, out_dir):
    """Classical vs energy strength ratio on the split-tilt grid."""
    _limiter_study(n, out_dir)


def _demo_outputs(sim, grid, state, out_dir):
    k = harness.demo_slice_index(grid)
    z = float(grid.centroid[grid.interior()][0, 0, k, 2])
    path = output.write_snapshot(state, grid,
                                 os.path.join(out_dir, "slice_final.csv"),
                                 format="csv-slice", slice_axis=2,
                                 slice_index=k)
    click.echo(f"wrote {path} (z = {z:.4f} m)")
    click.echo(f"total energy at t_end: {total_energy(grid, state):.6e} J")


@main.command()
@click.option("--nx", type=click.IntRange(min=1), default=60,
              show_default=True)
@click.option("--ny", type=click.IntRange(min=1), default=60,
              show_default=True)
@click.option("--nz", type=click.IntRange(min=1), default=120,
              show_default=True)
@click.option("--viscous/--inviscid", default=True,
              help="Include Darcy friction (default) or drop it.")
@_out_option
def demo(nx, ny, nz, viscous, out_dir):
    """Pressure pulse over the undulating poroelastic bed."""
    try:
        sim = harness.build_demo((nx, ny, nz), viscous=viscous)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    grid, _, state, _ = _run_single(sim, out_dir)
    _demo_outputs(sim, grid, state, out_dir)


@main.command(name="geometry-check")
@click.argument("config_file", type=click.Path(exists=True, dir_okay=False))
def geometry_check(config_file):
    """Audit grid geometry for the problem a config describes."""
    try:
        request = config_mod.load_config(config_file)
        grid = config_mod.grid_for(request)
    except (config_mod.ConfigError, ValueError) as exc:
        raise click.ClickException(str(exc)) from exc
    result = harness.geometry_check(grid)
    for key in ("cells", "closed_surface_residual", "min_volume",
                "total_volume", "max_face_area"):
        click.echo(f"{key}: {result[key]}")
    if not result["ok"]:
        raise click.ClickException("geometry check FAILED")
    click.echo("geometry check passed")


if __name__ == "__main__":
    main()
