"""Figure rendering for snapshot slices and convergence reports."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .report import read_report
from .snapshot import AXIS_NAMES, FIELD_ALIASES, load_snapshot

# Fields that are meaningfully one-signed.  Everything else is drawn on
# a diverging scale symmetric about zero so sign structure reads off
# the colors directly.
UNSIGNED_FIELDS = frozenset({"energy", "material_id"})


def _canonical_order(fields) -> list[str]:
    """Requested names resolved through aliases, deduplicated in order."""
    out: list[str] = []
    for name in fields:
        key = FIELD_ALIASES.get(name, name)
        if key not in out:
            out.append(key)
    return out


def render_slices(snapshot_path, fields, out_dir=".", axis="y",
                  index=None) -> list[str]:
    """Renders one PNG per requested field from a snapshot slice.

    Each image shows a pcolormesh of the cell layer with a colorbar and
    axis labels in meters; files are named slice_<field>.png inside
    out_dir.  Returns the written paths in request order.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    view = load_snapshot(snapshot_path)
    for name in fields:
        view.field(name)  # raises with the available names on a miss
    plane = view.plane(axis, index)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[str] = []
    for name in _canonical_order(fields):
        data = plane.fields[name]
        fig, ax = plt.subplots(figsize=(5.0, 4.2))
        if name in UNSIGNED_FIELDS:
            top = float(data.max())
            mesh = ax.pcolormesh(plane.U, plane.V, data, cmap="viridis",
                                 vmin=0.0, vmax=top if top > 0.0 else 1.0)
        else:
            span = float(np.abs(data).max()) or 1.0
            mesh = ax.pcolormesh(plane.U, plane.V, data, cmap="RdBu_r",
                                 vmin=-span, vmax=span)
        fig.colorbar(mesh, ax=ax, label=name)
        ax.set_xlabel(plane.u_label)
        ax.set_ylabel(plane.v_label)
        ax.set_title(f"{name}, {AXIS_NAMES[plane.axis]} layer {plane.index}",
                     fontsize=10)
        ax.set_aspect("equal")
        fig.tight_layout()
        out = out_dir / f"slice_{name}.png"
        fig.savefig(out, dpi=150)
        plt.close(fig)
        written.append(str(out))
    return written


def render_convergence(report_path, out_path) -> dict[tuple[str, str], float]:
    """Log-log error plot of the stacked norms in a convergence report.

    One line per (case, norm) series with at least two resolutions,
    annotated with the fitted slope; per-component norms (names holding
    a bracket) stay off the summary plot.  Returns {(case, norm):
    fitted rate}.  Raises ValueError, writing nothing, when no series
    qualifies.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = read_report(report_path)
    series: dict[tuple[str, str], list[tuple[int, float]]] = {}
    for row in rows:
        if "[" in row["norm"]:
            continue
        series.setdefault((row["case"], row["norm"]), []).append(
            (row["N"], row["value"]))

    usable = {key: sorted(pts) for key, pts in series.items()
              if len(pts) >= 2}
    if not usable:
        raise ValueError(
            f"{report_path}: no (case, norm) series has two or more "
            "resolutions to fit")

    rates: dict[tuple[str, str], float] = {}
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    for case, norm in sorted(usable, key=str):
        pts = usable[(case, norm)]
        N = np.array([p[0] for p in pts], dtype=float)
        v = np.array([p[1] for p in pts], dtype=float)
        rate = -float(np.polyfit(np.log(N), np.log(v), 1)[0])
        rates[(case, norm)] = rate
        ax.loglog(N, v, "o-", label=f"case {case} {norm} (rate {rate:.2f})")
    ax.set_xlabel("cells per edge N")
    ax.set_ylabel("relative error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return rates
