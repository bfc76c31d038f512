"""Figure rendering for porowave output files.

Reads the solver's legacy ASCII VTK snapshots and report.csv files and
renders slice plots and log-log convergence figures.  Only the
documented file formats are consumed; there is no dependency on the
solver package.
"""

from porowave_viz.render import render_convergence, render_slices
from porowave_viz.report import read_report
from porowave_viz.snapshot import PlaneSlice, SnapshotView, load_snapshot

__all__ = [
    "SnapshotView",
    "PlaneSlice",
    "load_snapshot",
    "read_report",
    "render_slices",
    "render_convergence",
]
