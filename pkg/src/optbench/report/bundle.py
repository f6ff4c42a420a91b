"""Assemble tables, plots and curve exports into a report directory with a manifest."""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Optional, Sequence

import jsonschema

from optbench import metrics
from optbench.errors import ValidationError
from optbench.report import plots, tables
from optbench.report.analysis import MEASURE_LABELS, build_inputs, default_measure, gammas_for
from optbench.runner import STRICT
from optbench.storage import atomic_write, dumps_json, safe_name

KINDS = ("tables", "perf", "data", "acc", "convergence", "trajectory", "runtime")

MANIFEST_SCHEMA = {
    "type": "object",
    "required": ["version", "inputs", "convergence_test", "cost_measure", "timing_source", "grids", "files",
                 "warnings", "featured"],
    "properties": {
        "version": {"const": 1},
        "inputs": {"type": "object"},
        "convergence_test": {"type": "string"},
        "cost_measure": {"enum": list(MEASURE_LABELS.values())},
        "timing_source": {"enum": list(MEASURE_LABELS.values()) + ["none"]},
        "grids": {"type": "object", "additionalProperties": {"type": "array", "items": {"type": "number"}}},
        "featured": {"type": "object"},
        "best_known": {"type": "array", "items": {"type": "string"}},
        "subset": {"type": ["array", "null"], "items": {"type": "string"}},
        "warnings": {"type": "array", "items": {"type": "string"}},
        "files": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["path", "sha256"],
                "properties": {"path": {"type": "string"}, "sha256": {"type": "string", "pattern": "^[0-9a-f]{64}$"}},
                "additionalProperties": False,
            },
        },
    },
}


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def plan_mode(plan: Optional[dict]) -> Optional[str]:
    if not plan or "mode" not in plan:
        return None
    return next(iter(plan["mode"]))


class _Writer:
    def __init__(self, root: Path):
        self.root = root
        self.files: list[str] = []

    def write(self, rel: str, text: str):
        atomic_write(self.root / rel, text)
        self.files.append(rel)

    def add(self, path: Path):
        self.files.append(path.relative_to(self.root).as_posix())


def _write_curves(w: _Writer, folder: str, curves):
    for c in curves:
        w.write(f"curves/{folder}/{safe_name(c.solver_id)}.csv", c.to_csv())


def build_report(records, out_dir, test: metrics.ConvergenceTest, kinds: Sequence[str] = KINDS,
                 plan: Optional[dict] = None, measure: Optional[str] = None, subset: Optional[Sequence[str]] = None,
                 best_known: bool = False, M: float = metrics.DEFAULT_M, inputs_info: Optional[dict] = None) -> dict:
    """Render the requested parts of a report and write manifest.json.

    Returns the manifest. Validation problems (missing solutions, refused
    time measures, bad subsets) raise ValidationError before anything is
    written.
    """
    unknown = [k for k in kinds if k not in KINDS]
    if unknown:
        raise ValidationError(f"unknown report kinds: {', '.join(unknown)}; choose from {', '.join(KINDS)}")
    if not records:
        raise ValidationError("results table is empty")
    if "acc" in kinds and not best_known:
        missing = sorted({r.problem_id for r in records if r.f_star is None})
        if missing:
            raise ValidationError("accuracy profiles need known optimal values; rerun with --best-known to "
                                  "substitute the best value any solver found. Missing for: " + ", ".join(missing))
    mode = plan_mode(plan)
    timing_mode = plan.get("timing_mode") if plan else None
    measure = measure or default_measure(mode, timing_mode)
    inputs = build_inputs(records, test, measure, mode, timing_mode, best_known)
    if subset:
        missing = [s for s in subset if s not in inputs.solvers]
        if missing:
            raise ValidationError(f"--subset names unknown solvers: {', '.join(missing)}")
    gammas = gammas_for(inputs.view, M) if "acc" in kinds else None

    root = Path(out_dir)
    w = _Writer(root)
    warnings: list[str] = []
    grids: dict = {}
    featured: dict = {}
    label = inputs.measure_label

    if "tables" in kinds:
        for path in tables.export_full_table(records, root):
            w.add(path)
        w.add(tables.export_summary_table(inputs, root))

    if "perf" in kinds:
        if subset:
            keep = set(subset)
            cost = {k: v for k, v in inputs.cost.items() if k[1] in keep}
            conv = {k: v for k, v in inputs.converged.items() if k[1] in keep}
        else:
            cost, conv = inputs.cost, inputs.converged
        ratios = metrics.performance_ratios(cost, conv)
        log_grid = metrics.log2_tau_grid(ratios)
        lin_grid = metrics.linear_tau_grid(ratios)
        if subset:
            log_curves = metrics.profile_subset(inputs.cost, inputs.converged, subset, log_grid)
            lin_curves = metrics.profile_subset(inputs.cost, inputs.converged, subset, lin_grid)
        else:
            log_curves = metrics.performance_profile(ratios, log_grid)
            lin_curves = metrics.performance_profile(ratios, lin_grid)
        w.write("plots/perf_profile_log.svg", plots.render_profile(log_curves, "perf_log", label))
        w.write("plots/perf_profile_linear.svg", plots.render_profile(lin_curves, "perf_linear", label))
        _write_curves(w, "perf_log", log_curves)
        _write_curves(w, "perf_linear", lin_curves)
        grids["perf_log"] = [float(v) for v in log_grid]
        grids["perf_linear"] = [float(v) for v in lin_grid]
        featured["performance_profile"] = "plots/perf_profile_log.svg"

    if "data" in kinds:
        evals = inputs.evals
        if subset:
            evals = {k: v for k, v in evals.items() if k[1] in set(subset)}
        k_grid = metrics.k_grid_for(evals, inputs.dims)
        curves = metrics.data_profile(evals, inputs.dims, k_grid)
        w.write("plots/data_profile.svg", plots.render_profile(curves, "data", "function evaluations"))
        _write_curves(w, "data", curves)
        grids["data"] = [float(v) for v in k_grid]

    if "acc" in kinds:
        g = gammas
        if subset:
            g = {k: v for k, v in g.items() if k[1] in set(subset)}
        grid = metrics.gamma_grid(M)
        curves = metrics.accuracy_profile(g, grid)
        w.write("plots/accuracy_profile.svg", plots.render_profile(curves, "accuracy"))
        _write_curves(w, "accuracy", curves)
        grids["accuracy"] = [float(v) for v in grid]

    by_problem: dict = {}
    for r in records:
        by_problem.setdefault(r.problem_id, []).append(r)

    if "convergence" in kinds:
        for pid, recs in by_problem.items():
            chosen = _first_runs(recs)
            traces = {sid: r.trace for sid, r in chosen.items()}
            if not any(t is not None and len(t) for t in traces.values()):
                warnings.append(f"convergence plot for {pid} skipped: no traces")
                continue
            f_star = next((r.f_star for r in recs if r.f_star is not None), None)
            svg, warn = plots.render_convergence_plot(traces, pid, log_y=f_star is not None,
                                                      f_ref=f_star if f_star is not None else 0.0)
            warnings.extend(warn)
            w.write(f"plots/convergence_{safe_name(pid)}.svg", svg)

    if "trajectory" in kinds:
        for pid, recs in by_problem.items():
            if recs[0].n != 2:
                continue
            chosen = _first_runs(recs)
            paths = {}
            for sid, r in chosen.items():
                if r.trace is None or not len(r.trace) or any(x is None for x in r.trace.points):
                    warnings.append(f"trajectory plot for {pid}: no iterate path for solver {sid}; omitted")
                    continue
                paths[sid] = r.trace.points
            if not paths:
                continue
            problem = inputs.problems.get(pid)
            svg = plots.render_trajectory_plot(paths, problem, problem_id=pid, n=2)
            w.write(f"plots/trajectory_{safe_name(pid)}.svg", svg)

    timing_source = label if inputs.measure != "evals" else "none"
    if "runtime" in kinds:
        if timing_mode != STRICT:
            warnings.append("runtime plots skipped: timing is only comparable for strict-mode results")
        else:
            timing_source = MEASURE_LABELS["cpu"]
            families: dict = {}
            for pid, p in inputs.problems.items():
                if p is not None and p.family:
                    families.setdefault(p.family, []).append(pid)
            for family, pids in sorted(families.items()):
                series: dict = {}
                for pid in pids:
                    for sid in sorted({r.solver_id for r in by_problem[pid]}):
                        times = [r.cpu_time_s for r in by_problem[pid] if r.solver_id == sid and r.cpu_time_s is not None]
                        if times:
                            series.setdefault(sid, []).append((by_problem[pid][0].n, sum(times) / len(times)))
                sizes = {n for pts in series.values() for n, _ in pts}
                if len(sizes) < 2:
                    continue
                series = {sid: plots.aggregate_series([pts]) for sid, pts in series.items()}
                w.write(f"plots/runtime_{safe_name(family)}.svg",
                        plots.render_runtime_plot(series, family, "CPU time (s)"))

    manifest = {
        "version": 1,
        "inputs": dict(inputs_info or {}),
        "convergence_test": str(test),
        "cost_measure": label,
        "timing_source": timing_source,
        "grids": grids,
        "featured": featured,
        "best_known": inputs.best_known,
        "subset": list(subset) if subset else None,
        "warnings": warnings,
        "files": [{"path": rel, "sha256": sha256_file(root / rel)} for rel in sorted(w.files)],
    }
    atomic_write(root / "manifest.json", dumps_json(manifest))
    return manifest


def _first_runs(recs) -> dict:
    """Per solver, the run on the first start with repeat 0."""
    first_start = min(r.start_id for r in recs)
    out = {}
    for r in sorted(recs, key=lambda r: (r.solver_id, r.repeat_index)):
        if r.start_id == first_start and r.solver_id not in out:
            out[r.solver_id] = r
    return out


def validate_manifest(out_dir) -> list[str]:
    """Problems with a report directory's manifest; empty when it validates."""
    root = Path(out_dir)
    path = root / "manifest.json"
    if not path.exists():
        return [f"{path} missing"]
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    errors = [e.message for e in jsonschema.Draft202012Validator(MANIFEST_SCHEMA).iter_errors(manifest)]
    for entry in manifest.get("files", []):
        target = root / entry.get("path", "")
        if not target.is_file():
            errors.append(f"listed file missing: {entry.get('path')}")
        elif sha256_file(target) != entry.get("sha256"):
            errors.append(f"hash mismatch: {entry.get('path')}")
    for name, grid in manifest.get("grids", {}).items():
        if any(not math.isfinite(v) for v in grid):
            errors.append(f"grid {name} has non-finite values")
    return errors
