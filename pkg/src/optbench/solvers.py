"""Reference solvers behind a uniform instrumentation layer.

Every solver talks to the problem only through an :class:`Oracle`, which
counts fundamental evaluations, keeps the best point seen, records the
improvement trace and enforces the evaluation budget / accuracy target by
raising control signals. Solvers never report their own counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from optbench.errors import NotFoundError, ValidationError
from optbench.problems import Problem

CONVERGED = "converged"
BUDGET_EXHAUSTED = "budget_exhausted"
STOPPED = "stopped"
SOLVER_FAILURE = "solver_failure"
EVAL_ERROR = "eval_error"
STATUSES = (CONVERGED, BUDGET_EXHAUSTED, STOPPED, SOLVER_FAILURE, EVAL_ERROR)


class RunSignal(Exception):
    """Control event raised by the oracle to end a run early."""


class BudgetExhausted(RunSignal):
    pass


class TargetReached(RunSignal):
    pass


class SolverFailure(Exception):
    """A solver hit a state it cannot continue from (bad gradient, flat simplex)."""


# --- seeds ----------------------------------------------------------------

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & MASK64
    return h


def derive_seed(master_seed: int, *parts) -> int:
    """Per-run seed from the master seed and run coordinates.

    The fields are rendered as text, joined with the unit separator 0x1f and
    hashed with 64-bit FNV-1a. Each run's stream depends only on its own
    coordinates, so adding a solver or problem leaves other streams intact.
    """
    text = "\x1f".join(str(v) for v in (master_seed, *parts))
    return fnv1a_64(text.encode("utf-8"))


# --- instrumentation ------------------------------------------------------

@dataclass
class EvalCounter:
    n_feval: int = 0
    n_geval: int = 0
    n_ceval: int = 0

    def as_tuple(self):
        return (self.n_feval, self.n_geval, self.n_ceval)


@dataclass
class IterateTrace:
    """Best-so-far history, one entry per strictly improving evaluation."""

    entries: list = field(default_factory=list)

    def append(self, eval_index: int, x, f_best: float):
        self.entries.append((eval_index, np.array(x, dtype=float), float(f_best)))

    def __len__(self):
        return len(self.entries)

    @property
    def eval_indices(self) -> list[int]:
        return [e[0] for e in self.entries]

    @property
    def values(self) -> list[float]:
        return [e[2] for e in self.entries]

    @property
    def points(self) -> list[np.ndarray]:
        return [e[1] for e in self.entries]

    def first_index_at_or_below(self, level: float) -> Optional[int]:
        for k, _, f in self.entries:
            if f <= level:
                return k
        return None


class Oracle:
    """Instrumented access to a problem for one run.

    ``budget`` caps objective evaluations: the call that would exceed it
    raises :class:`BudgetExhausted` without evaluating. ``target`` is an
    objective level; the first evaluation whose best-so-far value is at or
    below it raises :class:`TargetReached` after being counted.
    """

    def __init__(self, problem: Problem, budget: Optional[int] = None, target: Optional[float] = None,
                 capture_trace: bool = True):
        self.problem = problem
        self.budget = budget
        self.target = target
        self.counter = EvalCounter()
        self.trace = IterateTrace() if capture_trace else None
        self.best_x: Optional[np.ndarray] = None
        self.best_f = math.inf
        self.f_first: Optional[float] = None
        self.n_nonfinite = 0
        self.iterations = 0
        self.iterates: list[np.ndarray] = []

    @property
    def n(self) -> int:
        return self.problem.n

    @property
    def has_gradient(self) -> bool:
        return self.problem.gradient is not None

    def f(self, x) -> float:
        if self.budget is not None and self.counter.n_feval >= self.budget:
            raise BudgetExhausted
        x = np.array(x, dtype=float)
        with np.errstate(all="ignore"):
            try:
                value = float(self.problem.objective(x))
            except (ArithmeticError, ValueError):
                value = math.nan
        self.counter.n_feval += 1
        if self.f_first is None:
            self.f_first = value
        if not math.isfinite(value):
            self.n_nonfinite += 1
            value = math.inf
        if value < self.best_f or self.best_x is None:
            improved = value < self.best_f
            self.best_x = x
            self.best_f = min(value, self.best_f)
            if improved and self.trace is not None:
                self.trace.append(self.counter.n_feval, x, value)
        if self.target is not None and self.best_f <= self.target:
            raise TargetReached
        return value

    def grad(self, x) -> np.ndarray:
        if self.problem.gradient is None:
            raise ValidationError(f"{self.problem.id} has no gradient")
        self.counter.n_geval += 1
        with np.errstate(all="ignore"):
            return np.asarray(self.problem.gradient(np.array(x, dtype=float)), dtype=float)

    def constraints(self, x) -> np.ndarray:
        self.counter.n_ceval += 1
        x = np.array(x, dtype=float)
        with np.errstate(all="ignore"):
            return np.array([float(g(x)) for g in self.problem.constraints])

    def begin_iteration(self):
        self.iterations += 1

    def end_iteration(self, x):
        self.iterates.append(np.array(x, dtype=float))


# --- configuration --------------------------------------------------------

@dataclass(frozen=True)
class SolverSpec:
    run: Callable
    defaults: dict
    deterministic: bool
    needs_gradient: bool = False
    needs_seed: bool = False


@dataclass(frozen=True)
class SolverConfig:
    """A solver instance in an experiment: algorithm plus parameter settings."""

    id: str
    algorithm: str
    parameters: dict
    provenance: str = "default"

    @property
    def spec(self) -> SolverSpec:
        return get_solver(self.algorithm)

    @property
    def deterministic(self) -> bool:
        return self.spec.deterministic

    @classmethod
    def create(cls, algorithm: str, overrides: Optional[dict] = None, id: Optional[str] = None,
               provenance: Optional[str] = None) -> "SolverConfig":
        spec = get_solver(algorithm)
        overrides = dict(overrides or {})
        unknown = sorted(set(overrides) - set(spec.defaults))
        if unknown:
            raise ValidationError(f"unknown parameters for {algorithm}: {', '.join(unknown)}")
        params = {k: overrides.get(k, v) for k, v in spec.defaults.items()}
        if provenance is None:
            provenance = "default" if not overrides else "hand-tuned: " + ", ".join(
                f"{k}={overrides[k]}" for k in sorted(overrides))
        return cls(id or algorithm, algorithm, params, provenance)

    def to_dict(self) -> dict:
        return {"id": self.id, "algorithm": self.algorithm, "deterministic": self.deterministic,
                "parameters": dict(self.parameters), "provenance": self.provenance}


@dataclass
class SolverResult:
    x: Optional[np.ndarray]
    f: float
    status: str
    iterations: int
    iterates: list
    message: str = ""


# --- solvers --------------------------------------------------------------

def compass_search(oracle: Oracle, x0, cfg: dict) -> str:
    """Coordinate pattern search with opportunistic polling.

    Polls +e1, -e1, ..., +en, -en in that order, moves to the first strictly
    better point, halves the step after a full unsuccessful cycle and never
    expands it. Every poll cycle counts as one iteration.
    """
    step = float(cfg["initial_step"])
    shrink = float(cfg["shrink_factor"])
    min_step = float(cfg["min_step"])
    if step <= 0:
        raise ValidationError("initial_step must be positive")
    x = np.array(x0, dtype=float)
    fx = oracle.f(x)
    while step >= min_step:
        oracle.begin_iteration()
        moved = False
        for i in range(x.size):
            for sign in (1.0, -1.0):
                y = x.copy()
                y[i] += sign * step
                fy = oracle.f(y)
                if fy < fx:
                    x, fx = y, fy
                    moved = True
                    break
            if moved:
                break
        if not moved:
            step *= shrink
        oracle.end_iteration(x)
    return STOPPED


def _simplex_volume(simplex: np.ndarray) -> float:
    n = simplex.shape[1]
    edges = simplex[1:] - simplex[0]
    with np.errstate(all="ignore"):
        sign, logdet = np.linalg.slogdet(edges)
    if sign == 0:
        return 0.0
    return math.exp(logdet - math.lgamma(n + 1))


def nelder_mead(oracle: Oracle, x0, cfg: dict) -> str:
    alpha, gamma = float(cfg["reflection"]), float(cfg["expansion"])
    rho, sigma = float(cfg["contraction"]), float(cfg["shrink"])
    x0 = np.array(x0, dtype=float)
    n = x0.size
    h = cfg["simplex_scale"]
    if h is None:
        h = 0.05 * max(1.0, float(np.max(np.abs(x0))))
    simplex = np.vstack([x0] + [x0 + h * e for e in np.eye(n)])
    fvals = np.empty(n + 1)
    for i in range(n + 1):
        fvals[i] = oracle.f(simplex[i])
    while True:
        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]
        diam = float(np.max(np.abs(simplex[1:] - simplex[0])))
        if diam <= cfg["xtol"]:
            return STOPPED
        if _simplex_volume(simplex) < 1e-300:
            raise SolverFailure("degenerate simplex")
        oracle.begin_iteration()
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + alpha * (centroid - worst)
        fr = oracle.f(xr)
        if fvals[0] <= fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
        elif fr < fvals[0]:
            xe = centroid + gamma * (xr - centroid)
            fe = oracle.f(xe)
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
        else:
            if fr < fvals[-1]:
                xc = centroid + rho * (xr - centroid)
                fc = oracle.f(xc)
                accept = fc <= fr
            else:
                xc = centroid + rho * (worst - centroid)
                fc = oracle.f(xc)
                accept = fc < fvals[-1]
            if accept:
                simplex[-1], fvals[-1] = xc, fc
            else:
                for i in range(1, n + 1):
                    simplex[i] = simplex[0] + sigma * (simplex[i] - simplex[0])
                    fvals[i] = oracle.f(simplex[i])
        oracle.end_iteration(simplex[int(np.argmin(fvals))])


def gradient_descent(oracle: Oracle, x0, cfg: dict) -> str:
    """Steepest descent with backtracking Armijo line search (halving)."""
    if not oracle.has_gradient:
        raise ValidationError(f"gradient_descent needs a gradient; {oracle.problem.id} has none")
    c = float(cfg["armijo_c"])
    step0 = float(cfg["step0"])
    x = np.array(x0, dtype=float)
    fx = oracle.f(x)
    while True:
        oracle.begin_iteration()
        g = oracle.grad(x)
        if not np.all(np.isfinite(g)):
            raise SolverFailure("non-finite gradient")
        gg = float(g @ g)
        if math.sqrt(gg) <= cfg["gtol"]:
            oracle.end_iteration(x)
            return STOPPED
        t = step0
        for _ in range(int(cfg["max_backtracks"])):
            y = x - t * g
            fy = oracle.f(y)
            if fy <= fx - c * t * gg:
                break
            t *= 0.5
        else:
            oracle.end_iteration(x)
            return STOPPED
        x, fx = y, fy
        oracle.end_iteration(x)


def random_search(oracle: Oracle, x0, cfg: dict, seed: int) -> str:
    """Sample one point uniformly in a box around the incumbent per iteration."""
    max_iter = cfg["max_iterations"]
    if oracle.budget is None and oracle.target is None and max_iter is None:
        raise ValidationError("random_search needs a budget, a target or max_iterations")
    rng = np.random.default_rng(seed)
    radius = float(cfg["radius"])
    x = np.array(x0, dtype=float)
    fx = oracle.f(x)
    while max_iter is None or oracle.iterations < max_iter:
        oracle.begin_iteration()
        y = x + rng.uniform(-radius, radius, size=x.size)
        fy = oracle.f(y)
        if fy < fx:
            x, fx = y, fy
        oracle.end_iteration(x)
    return STOPPED


SOLVERS: dict[str, SolverSpec] = {
    "compass_search": SolverSpec(
        compass_search, {"initial_step": 1.0, "shrink_factor": 0.5, "min_step": 1e-12}, deterministic=True),
    "nelder_mead": SolverSpec(
        nelder_mead,
        {"reflection": 1.0, "expansion": 2.0, "contraction": 0.5, "shrink": 0.5, "simplex_scale": None,
         "xtol": 1e-12},
        deterministic=True),
    "gradient_descent": SolverSpec(
        gradient_descent, {"step0": 1.0, "armijo_c": 1e-4, "gtol": 0.0, "max_backtracks": 60},
        deterministic=True, needs_gradient=True),
    "random_search": SolverSpec(
        random_search, {"radius": 1.0, "max_iterations": None}, deterministic=False, needs_seed=True),
}


def rounding_compass(oracle: Oracle, x0, cfg: dict) -> str:
    """Compass search on the integer lattice: snaps the start, never steps below 1.

    A deliberately structure-exploiting solver used to validate the shift
    audit; it is not listed among the reference solvers.
    """
    oracle.f(x0)
    x = np.round(np.array(x0, dtype=float))
    fx = oracle.f(x)
    while True:
        oracle.begin_iteration()
        moved = False
        for i in range(x.size):
            for sign in (1.0, -1.0):
                y = x.copy()
                y[i] += sign
                fy = oracle.f(y)
                if fy < fx:
                    x, fx, moved = y, fy, True
                    break
            if moved:
                break
        oracle.end_iteration(x)
        if not moved:
            return STOPPED


# reachable by name (audit, tests) but not part of the listed registry
DIAGNOSTIC_SOLVERS: dict[str, SolverSpec] = {
    "rounding_compass": SolverSpec(rounding_compass, {}, deterministic=True),
}


def solver_names() -> list[str]:
    return list(SOLVERS)


def get_solver(name: str) -> SolverSpec:
    try:
        return SOLVERS[name] if name in SOLVERS else DIAGNOSTIC_SOLVERS[name]
    except KeyError:
        raise NotFoundError(f"unknown solver {name!r}; registered solvers: {', '.join(SOLVERS)}") from None


def run_solver(cfg: SolverConfig, oracle: Oracle, x0, seed: Optional[int] = None) -> SolverResult:
    """Run one solver to completion, translating control signals into a status.

    The returned point and value are the oracle's best-so-far, so a run cut
    short by the budget still reports what it found.
    """
    spec = cfg.spec
    if spec.needs_gradient and not oracle.has_gradient:
        raise ValidationError(f"solver {cfg.id} needs a gradient; {oracle.problem.id} has none")
    message = ""
    try:
        if spec.needs_seed:
            status = spec.run(oracle, x0, cfg.parameters, seed if seed is not None else 0)
        else:
            status = spec.run(oracle, x0, cfg.parameters)
    except TargetReached:
        status = CONVERGED
    except BudgetExhausted:
        status = BUDGET_EXHAUSTED
    except ValidationError:
        raise
    except Exception as exc:  # a crashing solver or objective is data, not a harness error
        status = SOLVER_FAILURE
        message = f"{type(exc).__name__}: {exc}"
    if oracle.iterations > len(oracle.iterates) and oracle.best_x is not None:
        oracle.iterates.append(np.array(oracle.best_x))
    if oracle.f_first is not None and not math.isfinite(oracle.f_first) and not math.isfinite(oracle.best_f):
        status = EVAL_ERROR
    return SolverResult(oracle.best_x, oracle.best_f, status, oracle.iterations, oracle.iterates, message)
