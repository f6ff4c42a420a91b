"""Renderers for profile, convergence, trajectory and runtime plots."""

from __future__ import annotations

import math
from typing import Mapping, Optional, Sequence

import numpy as np

from optbench.errors import DataIntegrityError, ValidationError
from optbench.metrics import ProfileCurve, fmt_float
from optbench.report.svg import Chart

PROFILE_STYLES = {
    "perf_log": ("Performance profile", "log2(tau)", "fraction of problems  rho_s(tau)"),
    "perf_linear": ("Performance profile", "tau", "fraction of problems  rho_s(tau)"),
    "data": ("Data profile", "k (simplex-gradient budgets)", "fraction of problems  d_s(k)"),
    "accuracy": ("Accuracy profile", "gamma (digits of accuracy)", "fraction of problems  R_s(tau)"),
}


def _check_curve(c: ProfileCurve):
    v = np.asarray(c.values, dtype=float)
    if v.size == 0 or np.any(np.isnan(v)) or np.any(v < 0) or np.any(v > 1):
        raise DataIntegrityError(f"profile curve for {c.solver_id} has values outside [0, 1]")


def _step_points(xs, ys):
    """Vertices of a right-continuous step function through (xs[i], ys[i])."""
    px, py = [xs[0]], [ys[0]]
    for i in range(1, len(xs)):
        if ys[i] != ys[i - 1]:
            px.append(xs[i])
            py.append(ys[i - 1])
        px.append(xs[i])
        py.append(ys[i])
    return px, py


def perf_log_xmax(curves: Sequence[ProfileCurve]) -> int:
    top = max(max(c.thresholds) for c in curves)
    return max(1, math.ceil(math.log2(top) - 1e-12)) if top > 1 else 1


def render_profile(curves: Sequence[ProfileCurve], style: str, measure_label: Optional[str] = None) -> str:
    """One step polyline per solver plus legend. ``measure_label`` names the cost behind tau."""
    if style not in PROFILE_STYLES:
        raise ValidationError(f"unknown profile style {style!r}; expected one of {', '.join(PROFILE_STYLES)}")
    if not curves:
        raise ValidationError("render_profile needs at least one curve")
    for c in curves:
        _check_curve(c)
    title, xlabel, ylabel = PROFILE_STYLES[style]
    if measure_label:
        title = f"{title} ({measure_label})"
    if style == "perf_log":
        xmax = perf_log_xmax(curves)
        transform = math.log2
        xlim = (0.0, float(xmax))
    else:
        transform = float
        lo = min(min(c.thresholds) for c in curves)
        hi = max(max(c.thresholds) for c in curves)
        xlim = (float(lo), float(hi))
    chart = Chart(title, xlabel, ylabel, xlim, (0.0, 1.05))
    chart.add_data(f"style,{style}")
    chart.add_data("solver,threshold,value")
    for i, c in enumerate(curves):
        xs = [transform(t) for t in c.thresholds]
        px, py = _step_points(xs, list(c.values))
        chart.polyline(px, py, i, c.solver_id)
        chart.add_legend(c.solver_id, i)
        for t, v in c.breakpoints:
            chart.add_data(f"{c.solver_id},{fmt_float(t)},{fmt_float(v)}")
    return chart.render()


def render_convergence_plot(traces: Mapping, problem_id: str, log_y: bool = False, f_ref: float = 0.0,
                            measure_label: str = "function evaluations") -> tuple[str, list[str]]:
    """Best value found against evaluations, one line per solver.

    ``traces`` maps solver id to an IterateTrace (or None). Solvers without
    a trace are left out and reported in the returned warnings.
    """
    warnings = []
    series = []
    for sid, trace in traces.items():
        if trace is None or not len(trace):
            warnings.append(f"convergence plot for {problem_id}: no trace for solver {sid}; omitted")
            continue
        xs = [float(k) for k in trace.eval_indices]
        ys = [float(f) for f in trace.values]
        if any(b > a for a, b in zip(ys, ys[1:])):
            raise DataIntegrityError(f"trace for {sid} on {problem_id} is not monotone")
        series.append((sid, xs, ys))
    if not series:
        raise ValidationError(f"no traces to plot for {problem_id}")
    if log_y:
        gaps = [y - f_ref for _, _, ys in series for y in ys if y - f_ref > 0]
        floor = max(min(gaps) / 10, 1e-300) if gaps else 1e-16
        series = [(sid, xs, [math.log10(max(y - f_ref, floor)) for y in ys]) for sid, xs, ys in series]
        ylabel = "log10(best f - f*)"
    else:
        ylabel = "best f found"
    all_x = [x for _, xs, _ in series for x in xs]
    all_y = [y for _, _, ys in series for y in ys if math.isfinite(y)]
    ylo, yhi = (min(all_y), max(all_y)) if all_y else (0.0, 1.0)
    pad = 0.05 * (yhi - ylo) if yhi > ylo else 1.0
    chart = Chart(f"Convergence on {problem_id}", measure_label, ylabel, (0.0, max(all_x) * 1.02 + 1),
                  (ylo - pad, yhi + pad))
    chart.add_data("solver,eval_index,value")
    for i, (sid, xs, ys) in enumerate(series):
        if len(xs) == 1:
            chart.marker(xs[0], ys[0], i, sid)
        else:
            chart.polyline(xs, ys, i, sid)
        chart.add_legend(sid, i)
        for x, y in zip(xs, ys):
            chart.add_data(f"{sid},{fmt_float(x)},{fmt_float(y)}")
    return chart.render(), warnings


def _contour_levels(z: np.ndarray, count: int = 12) -> list[float]:
    finite = z[np.isfinite(z)]
    if finite.size == 0:
        return []
    zmin, zmax = float(finite.min()), float(finite.max())
    if zmax <= zmin:
        return []
    # geometric spacing above the minimum resolves narrow valleys
    offs = np.geomspace(1e-3, 1.0, count) * (zmax - zmin)
    return [zmin + float(o) for o in offs]


def render_trajectory_plot(traces: Mapping, problem=None, contours: bool = True, problem_id: Optional[str] = None,
                           n: Optional[int] = None) -> str:
    """Iterate paths of each solver on a 2-D problem, over objective contours.

    ``traces`` maps solver id to a sequence of 2-D points.
    """
    dim = problem.n if problem is not None else n
    pid = problem.id if problem is not None else (problem_id or "problem")
    if dim != 2:
        raise ValidationError(f"trajectory plots need a 2-variable problem; {pid} has n={dim} "
                              "(projections are not supported)")
    paths = [(sid, np.asarray([np.asarray(p, dtype=float) for p in pts])) for sid, pts in traces.items()
             if pts is not None and len(pts)]
    if not paths:
        raise ValidationError(f"no iterate paths to plot for {pid}")
    allpts = np.vstack([p for _, p in paths])
    lo, hi = allpts.min(axis=0), allpts.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    lo, hi = lo - 0.1 * span, hi + 0.1 * span
    if np.all(hi - lo < 1e-6):
        lo, hi = lo - 1.0, hi + 1.0
    chart = Chart(f"Trajectories on {pid}", "x1", "x2", (lo[0], hi[0]), (lo[1], hi[1]))
    if contours and problem is not None:
        import contourpy

        gx = np.linspace(lo[0], hi[0], 80)
        gy = np.linspace(lo[1], hi[1], 80)
        with np.errstate(all="ignore"):
            z = np.array([[problem.objective(np.array([x, y])) for x in gx] for y in gy], dtype=float)
        z = np.where(np.isfinite(z), z, np.nan)
        gen = contourpy.contour_generator(gx, gy, np.ma.masked_invalid(z))
        for level in _contour_levels(z):
            for line in gen.lines(level):
                chart.contour(line[:, 0], line[:, 1])
    chart.add_data("solver,step,x1,x2")
    for i, (sid, pts) in enumerate(paths):
        if len(pts) == 1:
            chart.marker(pts[0, 0], pts[0, 1], i, sid)
        else:
            chart.polyline(pts[:, 0], pts[:, 1], i, sid)
        chart.add_legend(sid, i)
        for k, (a, b) in enumerate(pts):
            chart.add_data(f"{sid},{k},{fmt_float(a)},{fmt_float(b)}")
    return chart.render()


def aggregate_series(series_list: Sequence[Sequence]) -> list[tuple[float, float]]:
    """Mean cost per size across several (size, cost) series."""
    buckets: dict = {}
    for series in series_list:
        for size, cost in series:
            buckets.setdefault(size, []).append(float(cost))
    return [(size, sum(v) / len(v)) for size, v in sorted(buckets.items())]


def render_runtime_plot(series: Mapping, family: str = "", cost_label: str = "CPU time (s)") -> str:
    """Cost against instance size, one line per solver."""
    sizes = sorted({size for pts in series.values() for size, _ in pts})
    if len(sizes) < 2:
        raise ValidationError("runtime plot needs at least two instance sizes")
    costs = [c for pts in series.values() for _, c in pts if math.isfinite(c)]
    ylo, yhi = (min(costs), max(costs)) if costs else (0.0, 1.0)
    pad = 0.05 * (yhi - ylo) if yhi > ylo else max(abs(yhi), 1.0) * 0.05
    title = f"Runtime across sizes: {family}" if family else "Runtime across sizes"
    chart = Chart(title, "problem size n", cost_label, (sizes[0], sizes[-1]), (min(0.0, ylo - pad), yhi + pad))
    chart.add_data("solver,n,cost")
    for i, (sid, pts) in enumerate(series.items()):
        pts = sorted(pts)
        xs = [float(s) for s, _ in pts]
        ys = [float(c) for _, c in pts]
        if len(xs) == 1:
            chart.marker(xs[0], ys[0], i, sid)
        else:
            chart.polyline(xs, ys, i, sid)
        chart.add_legend(sid, i)
        for x, y in zip(xs, ys):
            chart.add_data(f"{sid},{fmt_float(x)},{fmt_float(y)}")
    return chart.render()
