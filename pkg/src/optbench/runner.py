"""Experiment orchestration: expand the run grid, enforce the protocol, time runs."""

from __future__ import annotations

import hashlib
import json
import math
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional, Union

import numpy as np

from optbench import metrics
from optbench.errors import PlanValidationError, ValidationError
from optbench.problems import Problem, StartingPointSet, TestSet, evaluate, perturb_starting_points, shift_problem
from optbench.solvers import (
    CONVERGED,
    EVAL_ERROR,
    IterateTrace,
    Oracle,
    SolverConfig,
    derive_seed,
    run_solver,
)

STRICT = "strict"
THROUGHPUT = "throughput"


@dataclass(frozen=True)
class FixedTarget:
    epsilon: float
    safety_budget: int

    def to_dict(self):
        return {"fixed_target": {"epsilon": self.epsilon, "safety_budget": self.safety_budget}}


@dataclass(frozen=True)
class FixedCost:
    budget: int

    def to_dict(self):
        return {"fixed_cost": {"budget": self.budget}}


Mode = Union[FixedTarget, FixedCost]


def standard_starts(test_set: TestSet) -> dict[str, StartingPointSet]:
    return {p.id: StartingPointSet(p.id, (("s0", p.x_standard),), {"rule": "standard"}) for p in test_set}


def perturbed_starts(test_set: TestSet, radius: float, count: int, master_seed: int) -> dict[str, StartingPointSet]:
    """One starting-point set per problem, seeded from the master seed and problem id."""
    return {
        p.id: perturb_starting_points(p, radius, count, derive_seed(master_seed, "start", p.id) % 2**63)
        for p in test_set
    }


@dataclass
class ExperimentPlan:
    test_set: TestSet
    solvers: list
    mode: Mode
    repeats: int = 1
    starting_points: Optional[dict] = None
    master_seed: int = 0
    timing_mode: str = STRICT
    workers: int = 4
    capture_trace: bool = True
    # deterministic solvers give identical repeats; False runs them once
    repeat_deterministic: bool = True

    def __post_init__(self):
        if self.starting_points is None:
            self.starting_points = standard_starts(self.test_set)

    def repeats_for(self, cfg: SolverConfig) -> int:
        if cfg.deterministic and not self.repeat_deterministic:
            return 1
        return self.repeats

    def validate(self) -> list[str]:
        """Raise on invalid plans; return warnings for questionable ones."""
        warnings = []
        if not self.solvers:
            raise PlanValidationError("plan has no solvers")
        ids = [s.id for s in self.solvers]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise PlanValidationError(f"duplicate solver ids: {', '.join(dupes)}")
        if self.repeats < 1:
            raise PlanValidationError("repeats must be >= 1")
        if self.timing_mode not in (STRICT, THROUGHPUT):
            raise PlanValidationError(f"timing_mode must be strict or throughput, got {self.timing_mode!r}")
        if isinstance(self.mode, FixedTarget):
            if not self.mode.epsilon > 0 or self.mode.safety_budget < 1:
                raise PlanValidationError("fixed_target needs epsilon > 0 and safety_budget >= 1")
            unknown = [p.id for p in self.test_set if p.f_star is None]
            if unknown:
                raise PlanValidationError(
                    "fixed-target mode needs known optimal values; missing for: " + ", ".join(unknown))
        elif isinstance(self.mode, FixedCost):
            if self.mode.budget < 1:
                raise PlanValidationError("fixed_cost budget must be >= 1")
        else:
            raise PlanValidationError(f"unknown mode {self.mode!r}")
        for p in self.test_set:
            sps = self.starting_points.get(p.id)
            if sps is None or not sps.points:
                raise PlanValidationError(f"problem {p.id} has no starting points")
            for sid, x in sps.points:
                if x.shape != (p.n,):
                    raise PlanValidationError(f"starting point {sid} of {p.id} has wrong dimension")
            for cfg in self.solvers:
                if cfg.spec.needs_gradient and not p.has_gradient:
                    raise PlanValidationError(f"solver {cfg.id} needs gradients but {p.id} has none")
        if self.repeats == 1 and any(not s.deterministic for s in self.solvers):
            warnings.append("non-deterministic solvers with repeats=1: repeat each test several times")
        if self.test_set.small:
            warnings.append(f"test set has {len(self.test_set)} problems; at least 20 are recommended")
        provenances = {s.provenance == "default" for s in self.solvers}
        if len(provenances) > 1:
            warnings.append("mixed parameter provenance: some solvers tuned, others at defaults")
        return warnings

    def to_dict(self) -> dict:
        return {
            "test_set": {"id": self.test_set.id, "problems": [p.id for p in self.test_set]},
            "solvers": [s.to_dict() for s in self.solvers],
            "mode": self.mode.to_dict(),
            "repeats": self.repeats,
            "repeat_deterministic": self.repeat_deterministic,
            "master_seed": self.master_seed,
            "timing_mode": self.timing_mode,
            "capture_trace": self.capture_trace,
            "starting_points": {pid: sps.to_dict() for pid, sps in self.starting_points.items()},
        }

    def fingerprint(self) -> str:
        return fingerprint_of(self.to_dict())


def fingerprint_of(plan_dict: dict) -> str:
    blob = json.dumps(plan_dict, sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class RunRecord:
    problem_id: str
    solver_id: str
    start_id: str
    repeat_index: int
    seed: int
    status: str
    n: int
    n_feval: int
    n_geval: int
    n_ceval: int
    cpu_time_s: Optional[float]
    wall_time_s: float
    f_start: float
    f_best: float
    f_star: Optional[float]
    x_best: Optional[np.ndarray]
    violation: tuple = ()
    viol_sum: Optional[float] = None
    trace: Optional[IterateTrace] = None
    solver_parameters: dict = field(default_factory=dict)
    iterations: int = 0
    message: str = ""

    @property
    def key(self) -> tuple:
        return (self.problem_id, self.start_id, self.solver_id, self.repeat_index)

    @property
    def run_key(self) -> str:
        return f"{self.problem_id}__{self.solver_id}__{self.start_id}__r{self.repeat_index}"

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    @property
    def t_target(self) -> float:
        """Evaluations to reach the target in fixed-target mode; inf when unsuccessful."""
        return float(self.n_feval) if self.converged else math.inf


@dataclass
class ResultsTable:
    plan: dict
    fingerprint: str
    records: list
    environment: dict = field(default_factory=dict)

    @property
    def timing_mode(self) -> str:
        return self.plan.get("timing_mode", STRICT)

    @property
    def strict(self) -> bool:
        return self.timing_mode == STRICT

    def verify_fingerprint(self) -> bool:
        return fingerprint_of(self.plan) == self.fingerprint


def capture_environment() -> dict:
    env = {"os": platform.platform(), "python": platform.python_version(), "cpu_count": os.cpu_count(),
           "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds")}
    cpu = platform.processor()
    try:
        with open("/proc/cpuinfo") as fh:
            for line in fh:
                if line.startswith("model name"):
                    cpu = line.split(":", 1)[1].strip()
                    break
    except OSError:
        pass
    env["cpu_model"] = cpu or None
    return env


def measure_time(run):
    """Call ``run()`` and return (result, cpu seconds, wall seconds).

    CPU time is per-thread so concurrent runs do not charge each other.
    ``None`` stands in for CPU time when the clock is unavailable.
    """
    try:
        cpu0 = time.thread_time()
    except (AttributeError, OSError):
        cpu0 = None
    wall0 = time.perf_counter()
    result = run()
    wall = time.perf_counter() - wall0
    cpu = None
    if cpu0 is not None:
        cpu = max(0.0, time.thread_time() - cpu0)
    return result, cpu, max(0.0, wall)


def execute_run(problem: Problem, cfg: SolverConfig, x0, start_id: str, repeat: int, seed: int, mode: Mode,
                capture_trace: bool = True) -> RunRecord:
    if isinstance(mode, FixedTarget):
        oracle = Oracle(problem, budget=mode.safety_budget, target=problem.f_star + mode.epsilon,
                        capture_trace=capture_trace)
    else:
        oracle = Oracle(problem, budget=mode.budget, capture_trace=capture_trace)
    result, cpu, wall = measure_time(lambda: run_solver(cfg, oracle, x0, seed))
    f_start, _ = evaluate(problem, x0)
    status = result.status
    if not math.isfinite(f_start):
        status = EVAL_ERROR
    violation = ()
    viol_sum = None
    if problem.m and result.x is not None:
        _, g = evaluate(problem, result.x)
        violation = tuple(float(v) for v in g)
        viol_sum = metrics.constraint_violation_summary(g)[0]
    return RunRecord(
        problem_id=problem.id, solver_id=cfg.id, start_id=start_id, repeat_index=repeat, seed=seed,
        status=status, n=problem.n, n_feval=oracle.counter.n_feval, n_geval=oracle.counter.n_geval,
        n_ceval=oracle.counter.n_ceval, cpu_time_s=cpu, wall_time_s=wall, f_start=f_start, f_best=result.f,
        f_star=problem.f_star, x_best=None if result.x is None else np.array(result.x), violation=violation,
        viol_sum=viol_sum, trace=oracle.trace, solver_parameters=dict(cfg.parameters),
        iterations=result.iterations, message=result.message,
    )


def run_experiment(plan: ExperimentPlan) -> ResultsTable:
    """Run every (problem, start, solver, repeat) of the plan once.

    All solvers receive the same starting points. Records come back sorted
    by (problem_id, start_id, solver_id, repeat_index) whatever the
    execution order.
    """
    plan.validate()
    jobs = []
    for p in plan.test_set:
        sps = plan.starting_points[p.id]
        for start_id, x0 in sps.points:
            for cfg in plan.solvers:
                for rep in range(plan.repeats_for(cfg)):
                    seed = derive_seed(plan.master_seed, p.id, cfg.id, start_id, rep) % 2**63
                    jobs.append((p, cfg, x0, start_id, rep, seed))

    def work(job):
        p, cfg, x0, start_id, rep, seed = job
        return execute_run(p, cfg, x0, start_id, rep, seed, plan.mode, plan.capture_trace)

    if plan.timing_mode == THROUGHPUT and plan.workers > 1:
        with ThreadPoolExecutor(max_workers=plan.workers) as pool:
            records = list(pool.map(work, jobs))
    else:
        records = [work(job) for job in jobs]
    records.sort(key=lambda r: r.key)
    plan_dict = plan.to_dict()
    return ResultsTable(plan_dict, fingerprint_of(plan_dict), records, capture_environment())


# --- analysis views -------------------------------------------------------

SUMMARY_FIELDS = ("f_best", "n_feval", "n_geval", "n_ceval", "cpu_time_s", "wall_time_s")


def aggregate_repeats(table: Union[ResultsTable, list], method: str = "expand") -> dict:
    """Analysis view of a results table.

    ``expand`` treats every (problem, start, repeat) as its own analysis
    problem and returns ``{(analysis_id, solver_id): record}``; solvers run
    fewer times than others (deterministic ones) are broadcast across the
    missing repeat indices. ``mean_std`` returns
    ``{(problem_id, solver_id): {field: (mean, std)}}``.
    """
    records = table.records if isinstance(table, ResultsTable) else list(table)
    if not records:
        raise ValidationError("cannot aggregate an empty results table")
    if method == "expand":
        max_rep = {}
        for r in records:
            k = (r.problem_id, r.start_id)
            max_rep[k] = max(max_rep.get(k, 0), r.repeat_index + 1)
        by_run = {(r.problem_id, r.start_id, r.solver_id, r.repeat_index): r for r in records}
        solvers = sorted({r.solver_id for r in records})
        view = {}
        for (pid, sid), reps in sorted(max_rep.items()):
            for rep in range(reps):
                aid = f"{pid}#{sid}#r{rep}"
                for s in solvers:
                    rec = by_run.get((pid, sid, s, rep))
                    if rec is None and rep > 0:
                        rec = by_run.get((pid, sid, s, 0))
                    if rec is not None:
                        view[(aid, s)] = rec
        return view
    if method == "mean_std":
        groups: dict = {}
        for r in records:
            groups.setdefault((r.problem_id, r.solver_id), []).append(r)
        out = {}
        for key, group in groups.items():
            stats = {}
            for name in SUMMARY_FIELDS:
                vals = [getattr(r, name) for r in group]
                if any(v is None for v in vals):
                    stats[name] = (None, None)
                else:
                    stats[name] = metrics.mean_std([float(v) for v in vals])
            out[key] = stats
        return out
    raise ValidationError(f"unknown aggregation method {method!r}; use expand or mean_std")


# --- shift audit ----------------------------------------------------------

AUDIT_TOLERANCE = 1e-8


@dataclass
class AuditReport:
    problem_id: str
    solver_id: str
    shift: list
    max_deviation: float
    f_gap: float
    n_points: int
    n_points_shifted: int
    tolerance: float = AUDIT_TOLERANCE

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance and self.f_gap <= self.tolerance

    def to_dict(self) -> dict:
        return {"problem_id": self.problem_id, "solver_id": self.solver_id, "shift": self.shift,
                "max_deviation": self.max_deviation, "f_gap": self.f_gap, "n_points": self.n_points,
                "n_points_shifted": self.n_points_shifted, "tolerance": self.tolerance, "passed": self.passed}


def audit_shift_invariance(problem: Problem, solver: SolverConfig, shift, budget: int) -> AuditReport:
    """Run a solver on a problem and on its translate and compare the runs.

    The shifted run starts from x_standard + shift; its improvement trace is
    translated back and compared point by point with the original one.
    Runs that differ in length count as an infinite deviation.
    """
    if not solver.deterministic:
        raise ValidationError(f"shift audit needs a deterministic solver; {solver.id} is randomized")
    shifted = shift_problem(problem, shift)
    shift = np.asarray(shift, dtype=float)
    o1 = Oracle(problem, budget=budget)
    o2 = Oracle(shifted, budget=budget)
    r1 = run_solver(solver, o1, problem.x_standard)
    r2 = run_solver(solver, o2, shifted.x_standard)
    a, b = o1.trace.entries, o2.trace.entries
    if len(a) != len(b) or [e[0] for e in a] != [e[0] for e in b]:
        deviation = math.inf
    elif not a:
        deviation = 0.0
    else:
        deviation = max(float(np.max(np.abs((xb - shift) - xa))) for (_, xa, _), (_, xb, _) in zip(a, b))
    f_gap = abs(r1.f - r2.f) if math.isfinite(r1.f) and math.isfinite(r2.f) else math.inf
    if r1.f == r2.f:
        f_gap = 0.0
    return AuditReport(problem.id, solver.id, [float(v) for v in shift], deviation, f_gap, len(a), len(b))
