"""Turn run records into the per-(problem, solver) maps the metrics consume."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

from optbench import metrics
from optbench.errors import NotFoundError, ValidationError
from optbench.problems import get_problem
from optbench.runner import THROUGHPUT, aggregate_repeats
from optbench.solvers import CONVERGED, EVAL_ERROR

MEASURE_LABELS = {"evals": "function evaluations", "cpu": "CPU time", "wall": "wall time"}


def best_known_prepass(records) -> tuple[list, list[str]]:
    """Fill missing f_star with the best final value any solver reached.

    Returns new records and the sorted ids of problems so treated.
    """
    best: dict = {}
    missing = set()
    for r in records:
        if r.f_star is None:
            missing.add(r.problem_id)
        if math.isfinite(r.f_best):
            best[r.problem_id] = min(best.get(r.problem_id, math.inf), r.f_best)
    out = []
    for r in records:
        if r.problem_id in missing and r.problem_id in best:
            r = replace(r, f_star=best[r.problem_id])
        out.append(r)
    return out, sorted(missing)


def lookup_problems(records) -> dict:
    out = {}
    for r in records:
        if r.problem_id not in out:
            try:
                out[r.problem_id] = get_problem(r.problem_id)
            except NotFoundError:
                out[r.problem_id] = None
    return out


def default_measure(mode: Optional[str], timing_mode: Optional[str]) -> str:
    if mode == "fixed_target" and timing_mode != THROUGHPUT:
        return "cpu"
    return "evals"


def check_measure(measure: str, mode: Optional[str], timing_mode: Optional[str]):
    if measure not in MEASURE_LABELS:
        raise ValidationError(f"unknown cost measure {measure!r}; use evals, cpu or wall")
    if measure == "evals":
        return
    if timing_mode is None:
        raise ValidationError("time-based profiles need plan.json next to results.csv to confirm strict timing")
    if timing_mode == THROUGHPUT:
        raise ValidationError("results were produced in throughput mode; timing fields are not comparable, "
                              "so time-based profiles are refused (use --measure evals)")
    if mode != "fixed_target":
        raise ValidationError("time-based profiles need fixed-target results; fixed-cost runs all spend the "
                              "same budget (use --measure evals)")


@dataclass
class AnalysisInputs:
    view: dict
    problems: dict
    cost: dict
    evals: dict
    converged: dict
    dims: dict
    measure: str
    best_known: list = field(default_factory=list)

    @property
    def measure_label(self) -> str:
        return MEASURE_LABELS[self.measure]

    @property
    def solvers(self) -> list[str]:
        seen = []
        for _, s in self.view:
            if s not in seen:
                seen.append(s)
        return seen


def _clock_floor(measure: str) -> float:
    try:
        res = time.get_clock_info("thread_time" if measure == "cpu" else "perf_counter").resolution
    except (ValueError, OSError):
        res = 1e-9
    return max(res, 1e-9)


def build_inputs(records, test: metrics.ConvergenceTest, measure: str = "evals", mode: Optional[str] = None,
                 timing_mode: Optional[str] = None, best_known: bool = False) -> AnalysisInputs:
    """Expanded analysis view plus cost, evals-to-pass and convergence maps."""
    check_measure(measure, mode, timing_mode)
    flagged: list[str] = []
    if best_known:
        records, flagged = best_known_prepass(records)
    problems = lookup_problems(records)
    view = aggregate_repeats(records, "expand")
    floor = _clock_floor(measure)
    cost, evals, converged, dims = {}, {}, {}, {}
    for (aid, sid), r in view.items():
        p = problems.get(r.problem_id)
        dims[aid] = r.n
        e = metrics.cost_to_pass(test, r, p) if r.status != EVAL_ERROR else math.inf
        evals[(aid, sid)] = e
        if measure == "evals":
            ok = math.isfinite(e)
            c = e
        else:
            ok = r.status == CONVERGED and metrics.passes(test, r, p)
            t = r.cpu_time_s if measure == "cpu" else r.wall_time_s
            if t is None:
                ok = False
            c = max(t, floor) if ok else math.inf
        converged[(aid, sid)] = ok
        cost[(aid, sid)] = c
    return AnalysisInputs(view, problems, cost, evals, converged, dims, measure, flagged)


def gammas_for(records_view: dict, M: float = metrics.DEFAULT_M) -> dict:
    """Capped digits of accuracy per (analysis problem, solver)."""
    out = {}
    missing = sorted({r.problem_id for r in records_view.values() if r.f_star is None})
    if missing:
        raise ValidationError("accuracy profiles need known optimal values (or --best-known); missing for: "
                              + ", ".join(missing))
    for key, r in records_view.items():
        if r.status == EVAL_ERROR or not math.isfinite(r.f_best) or not math.isfinite(r.f_start):
            out[key] = 0.0
            continue
        out[key] = metrics.accuracy_measures(r.f_start, r.f_best, r.f_star, M=M).gamma
    return out
