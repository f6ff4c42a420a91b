import csv
import io
import re
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest

from optbench.errors import DataIntegrityError, ValidationError
from optbench.metrics import ConvergenceTest, ProfileCurve
from optbench.problems import TestSet, get_problem
from optbench.report import (
    aggregate_series,
    build_inputs,
    build_report,
    export_full_table,
    export_summary_table,
    render_convergence_plot,
    render_profile,
    render_runtime_plot,
    render_trajectory_plot,
    summary_rows,
    validate_manifest,
)
from optbench.runner import ExperimentPlan, FixedCost, FixedTarget, run_experiment
from optbench.solvers import IterateTrace, Oracle, SolverConfig, run_solver
from optbench.storage import RESULTS_COLUMNS

GOLDEN = Path(__file__).parent / "golden"
ALL = ("compass_search", "nelder_mead", "gradient_descent", "random_search")


def polylines(svg, cls="series"):
    return re.findall(r'<polyline class="%s" data-series="([^"]*)" points="([^"]*)"' % cls, svg)


def legend(svg):
    return re.findall(r'class="legend-entry"[^>]*>([^<]*)<', svg)


def curves4():
    grid = (1.0, 2.0, 4.0, 8.0)
    return [ProfileCurve(s, grid, vals) for s, vals in
            (("A", (0.25, 0.5, 0.75, 1.0)), ("B", (0.0, 0.5, 0.5, 0.75)), ("C", (0.5, 0.5, 0.5, 0.5)),
             ("D", (0.0, 0.0, 0.25, 1.0)))]


# --- profiles --------------------------------------------------------------------

def test_profile_structure_and_determinism():
    svg = render_profile(curves4(), "perf_log", "function evaluations")
    assert [name for name, _ in polylines(svg)] == ["A", "B", "C", "D"]
    assert legend(svg) == ["A", "B", "C", "D"]
    assert render_profile(curves4(), "perf_log", "function evaluations") == svg
    assert "log2(tau)" in svg and "<!-- data" in svg and 'viewBox="0 0 800 600"' in svg


def test_perf_log_axis_max():
    grid = (1.0, 2.0, 5.0)
    svg = render_profile([ProfileCurve("A", grid, (0.5, 0.5, 1.0))], "perf_log")
    # ceil(log2 5) = 3: the right edge of the plot area carries tick 3
    ticks = re.findall(r'text-anchor="middle" font-family="sans-serif" font-size="12">([^<]*)<', svg)
    assert ticks[-1] == "3"


def test_profile_out_of_range_is_integrity_error():
    bad = SimpleNamespace(solver_id="x", thresholds=(1.0, 2.0), values=(0.5, 1.5), breakpoints=[])
    with pytest.raises(DataIntegrityError):
        render_profile([bad], "perf_linear")
    with pytest.raises(ValidationError):
        render_profile(curves4(), "pie")


def test_profile_step_vertices():
    svg = render_profile([ProfileCurve("A", (0.0, 1.0, 2.0), (0.0, 0.5, 1.0), "data")], "data")
    (_, pts), = polylines(svg)
    # right-continuous steps: 3 samples give 5 vertices
    assert len(pts.split()) == 5


# --- convergence -----------------------------------------------------------------

def trace_of(pairs, dim=1):
    t = IterateTrace()
    for k, f in pairs:
        t.append(k, np.zeros(dim), f)
    return t


def test_convergence_points():
    tr = trace_of([(1, 10.0), (50, 5.0), (100, 5.0), (200, 1.0)])
    svg, warnings = render_convergence_plot({"A": tr}, "p")
    (_, pts), = polylines(svg)
    assert len(pts.split()) == 4 and not warnings
    assert "A,200,1" in svg


def test_convergence_single_entry_marker_and_missing_trace():
    svg, warnings = render_convergence_plot({"A": trace_of([(1, 3.0)]), "B": None}, "p")
    assert '<circle class="series" data-series="A"' in svg
    assert len(warnings) == 1 and "B" in warnings[0]


def test_convergence_rejects_increasing_trace():
    with pytest.raises(DataIntegrityError):
        render_convergence_plot({"A": trace_of([(1, 1.0), (2, 2.0)])}, "p")


def rosenbrock_traces(budget=2000):
    p = get_problem("rosenbrock")
    out = {}
    for s in ALL:
        o = Oracle(p, budget=budget)
        run_solver(SolverConfig.create(s), o, p.x_standard, seed=1)
        out[s] = o.trace
    return out


def best_at(trace, k):
    return [f for i, f in zip(trace.eval_indices, trace.values) if i <= k][-1]


def test_rosenbrock_convergence_fixture():
    tr = rosenbrock_traces()
    # Nelder-Mead stops improving early yet finishes best
    assert tr["nelder_mead"].eval_indices[-1] < 300
    assert min(ALL, key=lambda s: tr[s].values[-1]) == "nelder_mead"
    # compass search is still improving at the very end of the budget
    assert tr["compass_search"].eval_indices[-1] > 1900
    assert best_at(tr["compass_search"], 1000) > 10 * tr["compass_search"].values[-1]
    # gradient descent stalls in the valley: under one digit gained over the last 1500 evaluations
    assert best_at(tr["gradient_descent"], 500) < 10 * tr["gradient_descent"].values[-1]
    svg, _ = render_convergence_plot(tr, "rosenbrock", log_y=True)
    assert svg == (GOLDEN / "convergence_rosenbrock.svg").read_text()


# --- trajectory ------------------------------------------------------------------

def test_trajectory_from_33():
    p = get_problem("rosenbrock")
    paths = {}
    for s in ("compass_search", "nelder_mead"):
        o = Oracle(p, budget=300)
        run_solver(SolverConfig.create(s), o, np.array([3.0, 3.0]))
        paths[s] = o.trace.points
    svg = render_trajectory_plot(paths, p)
    lines = dict(polylines(svg))
    for s, pts in paths.items():
        assert len(lines[s].split()) == len(pts)
        assert pts[0].tolist() == [3.0, 3.0]
    assert "compass_search,0,3,3" in svg and "nelder_mead,0,3,3" in svg
    assert '<polyline class="contour"' in svg
    assert render_trajectory_plot(paths, p) == svg


def test_trajectory_single_point_and_dimension_check():
    svg = render_trajectory_plot({"A": [np.array([1.0, 2.0])]}, problem_id="p", n=2)
    assert '<circle class="series" data-series="A"' in svg
    with pytest.raises(ValidationError, match="projection"):
        render_trajectory_plot({"A": [np.zeros(3)]}, get_problem("helical_valley"))


# --- runtime ---------------------------------------------------------------------

def test_runtime_plot():
    svg = render_runtime_plot({"A": [(2, 1.0), (4, 4.0), (8, 16.0)]}, "sphere")
    (_, pts), = polylines(svg)
    assert len(pts.split()) == 3 and "CPU time" in svg
    with pytest.raises(ValidationError):
        render_runtime_plot({"A": [(2, 1.0)]})


def test_aggregate_series():
    s = [(2, 1.0), (4, 3.0)]
    assert aggregate_series([s, s]) == s
    assert aggregate_series([[(2, 1.0), (4, 3.0)], [(2, 3.0), (4, 5.0)]]) == [(2, 2.0), (4, 4.0)]


# --- tables ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_table():
    t = TestSet("t", (get_problem("sphere_2"), get_problem("beale")))
    solvers = [SolverConfig.create(s) for s in ("compass_search", "nelder_mead", "random_search")]
    return run_experiment(ExperimentPlan(t, solvers, FixedCost(200), repeats=2))


def test_full_table(small_table, tmp_path):
    csv_path, tex_path = export_full_table(small_table.records, tmp_path)
    rows = list(csv.reader(io.StringIO(csv_path.read_text())))
    assert len(rows) == 13 and tuple(rows[0]) == RESULTS_COLUMNS
    tex = tex_path.read_text()
    assert "\\begin{longtable}" in tex and tex.count("\\\\") == 13
    assert "compass\\_search" in tex


def fake(pid, sid, f_best, n_feval, f_star=0.0, f_start=1.0):
    return SimpleNamespace(problem_id=pid, solver_id=sid, start_id="s0", repeat_index=0, n=2, status="budget_exhausted",
                           f_best=f_best, f_start=f_start, f_star=f_star, n_feval=n_feval, trace=None, x_best=None,
                           cpu_time_s=0.1, wall_time_s=0.1)


def test_summary_hand_computed():
    recs = [fake("p", "A", 0.0, 10), fake("q", "A", 0.5, 40), fake("p", "B", 0.0, 15), fake("q", "B", 0.0, 30)]
    inputs = build_inputs(recs, ConvergenceTest("abs_f", 1e-6))
    rows = {r["solver_id"]: r for r in summary_rows(inputs)}
    assert rows["A"]["success_rate"] == 0.5 and rows["A"]["mean_cost"] == 10.0
    assert rows["B"]["success_rate"] == 1.0 and rows["B"]["mean_cost"] == 22.5 and rows["B"]["median_cost"] == 22.5
    # p: A 10, B 15 -> both within 2x, only A within 4/3x; q: only B converged
    assert rows["A"]["competitive_pct"] == 50.0 and rows["A"]["very_competitive_pct"] == 50.0
    assert rows["B"]["competitive_pct"] == 100.0 and rows["B"]["very_competitive_pct"] == 50.0


def test_summary_single_solver_and_dash(tmp_path):
    inputs = build_inputs([fake("p", "A", 0.0, 5)], ConvergenceTest("abs_f", 1e-6))
    assert summary_rows(inputs)[0]["success_rate"] == 1.0
    inputs = build_inputs([fake("p", "A", 1.0, 5)], ConvergenceTest("abs_f", 1e-6))
    text = export_summary_table(inputs, tmp_path).read_text()
    assert "—" in text.splitlines()[1]


# --- bundle ----------------------------------------------------------------------

def test_bundle_manifest(small_table, tmp_path):
    man = build_report(small_table.records, tmp_path, ConvergenceTest("abs_f", 1e-6), plan=small_table.plan)
    assert validate_manifest(tmp_path) == []
    paths = {f["path"] for f in man["files"]}
    for name in ("tables/full.csv", "tables/full.tex", "tables/summary.csv", "plots/perf_profile_log.svg",
                 "plots/perf_profile_linear.svg", "plots/data_profile.svg", "plots/accuracy_profile.svg",
                 "plots/convergence_sphere_2.svg", "plots/trajectory_beale.svg"):
        assert name in paths
    assert man["cost_measure"] == "function evaluations"
    (tmp_path / "tables" / "full.csv").write_text("tampered")
    assert any("hash mismatch" in e for e in validate_manifest(tmp_path))


def test_bundle_perf_only(small_table, tmp_path):
    man = build_report(small_table.records, tmp_path, ConvergenceTest("abs_f", 1e-6), ["perf"])
    paths = sorted(f["path"] for f in man["files"])
    assert paths[:2] == ["curves/perf_linear/compass_search.csv", "curves/perf_linear/nelder_mead.csv"]
    assert "plots/perf_profile_log.svg" in paths and "plots/perf_profile_linear.svg" in paths
    assert not any(p.startswith("tables/") for p in paths)


def test_bundle_acc_needs_solutions(small_table, tmp_path):
    from dataclasses import replace

    recs = [replace(r, f_star=None) for r in small_table.records]
    with pytest.raises(ValidationError, match="best-known"):
        build_report(recs, tmp_path, ConvergenceTest("abs_f", 1e-6), ["acc"])
    man = build_report(recs, tmp_path, ConvergenceTest("abs_f", 1e-6), ["acc"], best_known=True)
    assert man["best_known"] == ["beale", "sphere_2"]


def test_bundle_refuses_time_profiles_from_throughput(tmp_path):
    t = TestSet("t", (get_problem("sphere_2"),))
    plan = ExperimentPlan(t, [SolverConfig.create("compass_search")], FixedTarget(1e-6, 500),
                          timing_mode="throughput")
    table = run_experiment(plan)
    with pytest.raises(ValidationError, match="throughput"):
        build_report(table.records, tmp_path, ConvergenceTest("abs_f", 1e-6), ["perf"], plan=table.plan,
                     measure="cpu")
    man = build_report(table.records, tmp_path, ConvergenceTest("abs_f", 1e-6), ["perf"], plan=table.plan)
    assert man["cost_measure"] == "function evaluations"


def test_bundle_time_label_strict_fixed_target(tmp_path):
    t = TestSet("t", (get_problem("sphere_2"), get_problem("beale")))
    plan = ExperimentPlan(t, [SolverConfig.create(s) for s in ("compass_search", "nelder_mead")],
                          FixedTarget(1e-6, 2000))
    table = run_experiment(plan)
    man = build_report(table.records, tmp_path, ConvergenceTest("abs_f", 1e-6), ["perf"], plan=table.plan)
    assert man["cost_measure"] == "CPU time"
    assert "CPU time" in (tmp_path / "plots" / "perf_profile_log.svg").read_text()


def test_subset_recomputes(small_table, tmp_path):
    man = build_report(small_table.records, tmp_path, ConvergenceTest("abs_f", 1e-6), ["perf"],
                       subset=["nelder_mead", "random_search"])
    assert man["subset"] == ["nelder_mead", "random_search"]
    assert not (tmp_path / "curves" / "perf_log" / "compass_search.csv").exists()
    with pytest.raises(ValidationError):
        build_report(small_table.records, tmp_path, ConvergenceTest("abs_f", 1e-6), ["perf"], subset=["zzz"])
