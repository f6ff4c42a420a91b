"""Tables, SVG plots and report bundles."""

from optbench.report.analysis import build_inputs
from optbench.report.bundle import KINDS, build_report, validate_manifest
from optbench.report.plots import (
    aggregate_series,
    render_convergence_plot,
    render_profile,
    render_runtime_plot,
    render_trajectory_plot,
)
from optbench.report.tables import export_full_table, export_summary_table, summary_rows

__all__ = [
    "KINDS",
    "aggregate_series",
    "build_inputs",
    "build_report",
    "export_full_table",
    "export_summary_table",
    "render_convergence_plot",
    "render_profile",
    "render_runtime_plot",
    "render_trajectory_plot",
    "summary_rows",
    "validate_manifest",
]
