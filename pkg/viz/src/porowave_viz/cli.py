"""Command line front end: ``viz slices`` and ``viz converge``."""

from __future__ import annotations

import click

from .render import render_convergence, render_slices


@click.group()
def main() -> None:
    """Renders figures from solver snapshot and report files."""


@main.command("slices")
@click.argument("snapshot", type=click.Path(exists=True, dir_okay=False))
@click.option("--fields", default="e,p,tau_zz,v_z", show_default=True,
              help="Comma-separated field names; aliases allowed.")
@click.option("--axis", type=click.Choice(["x", "y", "z"]), default="y",
              show_default=True, help="Slice normal axis.")
@click.option("--index", type=int, default=None,
              help="Cell layer along the slice axis (default: middle).")
@click.option("--out", type=click.Path(file_okay=False), default=".",
              show_default=True, help="Directory for the images.")
def slices(snapshot: str, fields: str, axis: str, index: int | None,
           out: str) -> None:
    """Renders one PNG per field from a snapshot slice."""
    names = [f.strip() for f in fields.split(",") if f.strip()]
    if not names:
        raise click.ClickException("no fields requested")
    try:
        written = render_slices(snapshot, names, out_dir=out, axis=axis,
                                index=index)
    except (ValueError, OSError) as exc:
        raise click.ClickException(str(exc)) from exc
    for path in written:
        click.echo(path)


@main.command("converge")
@click.argument("report", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False),
              default="converge.png", show_default=True,
              help="Output image path.")
def converge(report: str, out: str) -> None:
    """Plots every stacked-norm error series in a report."""
    try:
        rates = render_convergence(report, out)
    except (ValueError, OSError) as exc:
        raise click.ClickException(str(exc)) from exc
    for (case, norm), rate in sorted(rates.items(), key=lambda kv: str(kv[0])):
        click.echo(f"case {case} {norm}: rate {rate:.2f}")
    click.echo(out)
