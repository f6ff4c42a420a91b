"""Quality measures, constraint aggregates and benchmark profiles.

Everything here is a pure function of its inputs. Per-(problem, solver)
quantities are passed as dicts keyed by ``(problem_id, solver_id)``.
Failures are encoded as ``math.inf`` (ratios, costs) and survive export as
the token ``inf``.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from optbench.errors import DataIntegrityError, ValidationError

INF = math.inf
DEFAULT_M = 16.0
DEFAULT_FACTORS = (("competitive", 2.0), ("very competitive", 4.0 / 3.0))


# --- convergence tests ----------------------------------------------------

@dataclass(frozen=True)
class ConvergenceTest:
    """``kind`` is one of abs_f, rel_f, x_dist."""

    kind: str
    eps: float

    KINDS = ("abs_f", "rel_f", "x_dist")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValidationError(f"unknown convergence test {self.kind!r}; expected one of {self.KINDS}")
        if not self.eps > 0:
            raise ValidationError(f"convergence tolerance must be positive, got {self.eps}")

    @classmethod
    def parse(cls, text: str) -> "ConvergenceTest":
        """Parse ``kind:eps``, e.g. ``abs_f:1e-6``."""
        kind, sep, eps = text.partition(":")
        if not sep:
            raise ValidationError(f"convergence test must look like kind:eps, got {text!r}")
        try:
            value = float(eps)
        except ValueError:
            raise ValidationError(f"bad tolerance in convergence test {text!r}") from None
        return cls(kind.strip(), value)

    def __str__(self):
        return f"{self.kind}:{self.eps:g}"


def _known(record, problem, name):
    if problem is not None and getattr(problem, name, None) is not None:
        return getattr(problem, name)
    return getattr(record, name, None)


def _problem_id(record, problem):
    return problem.id if problem is not None else getattr(record, "problem_id", "?")


def passes(test: ConvergenceTest, record, problem=None) -> bool:
    """Whether a run's final point satisfies ``test``.

    Known solutions are taken from ``problem`` when given, otherwise from the
    record itself (``f_star`` column of the results table).
    """
    pid = _problem_id(record, problem)
    if test.kind == "x_dist":
        x_star = _known(record, problem, "x_star")
        if x_star is None:
            raise ValidationError(f"x_dist test needs a known minimizer for problem {pid}")
        if record.x_best is None:
            return False
        return float(np.linalg.norm(np.asarray(record.x_best) - np.asarray(x_star))) <= test.eps
    f_star = _known(record, problem, "f_star")
    if f_star is None:
        raise ValidationError(f"{test.kind} test needs a known optimal value for problem {pid}")
    if not math.isfinite(record.f_best):
        return False
    if test.kind == "abs_f":
        return record.f_best - f_star <= test.eps
    den = record.f_start - f_star
    if not den > 0:
        raise ValidationError(f"rel_f test undefined on problem {pid}: f_start does not exceed f_star")
    return (record.f_best - f_star) / den <= test.eps


def pass_level(test: ConvergenceTest, f_start: float, f_star: float) -> float:
    """Objective level at or below which an abs_f / rel_f test passes."""
    if test.kind == "abs_f":
        return f_star + test.eps
    if test.kind == "rel_f":
        return f_star + test.eps * (f_start - f_star)
    raise ValidationError("pass_level is only defined for value-based tests")


def cost_to_pass(test: ConvergenceTest, record, problem=None) -> float:
    """Objective evaluations until ``test`` was first satisfied, inf if never.

    Uses the improvement trace when the record carries one (fixed-cost runs);
    otherwise a passing run is charged its total evaluation count.
    """
    trace = getattr(record, "trace", None)
    if trace is not None and len(trace):
        if test.kind == "x_dist":
            x_star = _known(record, problem, "x_star")
            if x_star is None:
                raise ValidationError(f"x_dist test needs a known minimizer for problem {_problem_id(record, problem)}")
            for k, x, _ in trace.entries:
                if x is not None and np.linalg.norm(np.asarray(x) - np.asarray(x_star)) <= test.eps:
                    return float(k)
            return INF
        f_star = _known(record, problem, "f_star")
        if f_star is None:
            raise ValidationError(f"{test.kind} test needs a known optimal value for problem {_problem_id(record, problem)}")
        if test.kind == "rel_f" and not record.f_start > f_star:
            raise ValidationError(f"rel_f test undefined on problem {_problem_id(record, problem)}")
        k = trace.first_index_at_or_below(pass_level(test, record.f_start, f_star))
        return INF if k is None else float(k)
    return float(record.n_feval) if passes(test, record, problem) else INF


def success_rate(records: Sequence, test: ConvergenceTest, problems: Optional[Mapping] = None) -> float:
    if not records:
        raise ValidationError("success_rate needs at least one record")
    problems = problems or {}
    hits = sum(1 for r in records if passes(test, r, problems.get(r.problem_id)))
    return hits / len(records)


# --- accuracy -------------------------------------------------------------

@dataclass(frozen=True)
class AccuracyRecord:
    f_acc: Optional[float] = None
    f_acc_n: Optional[float] = None
    f_acc_l: Optional[float] = None
    x_acc: Optional[float] = None
    x_acc_n: Optional[float] = None
    x_acc_l: Optional[float] = None
    gamma: Optional[float] = None
    gamma_x: Optional[float] = None


def capped_digits(log_ratio: Optional[float], exact: bool, M: float) -> float:
    """Digits of accuracy gained, capped at ``M``.

    Exact solutions and undefined ratios both map to the cap.
    """
    if exact or log_ratio is None:
        return M
    g = -log_ratio
    return M if g > M else g


def accuracy_measures(f_start: float, f_best: float, f_star: Optional[float], x0=None, x_best=None, x_star=None,
                      M: float = DEFAULT_M, tol: float = 1e-10) -> AccuracyRecord:
    if not M > 0:
        raise ValidationError(f"M must be positive, got {M}")
    out = {}
    if f_star is not None:
        f_acc = f_best - f_star
        if f_acc < -tol * max(1.0, abs(f_star)):
            raise DataIntegrityError(f"final value {f_best!r} is below the optimal value {f_star!r}")
        gap = max(f_acc, 0.0)
        den = f_start - f_star
        f_acc_n = f_acc_l = None
        if den > 0:
            f_acc_n = f_acc / den
            f_acc_l = (math.log10(gap) - math.log10(den)) if gap > 0 else -INF
        out.update(f_acc=f_acc, f_acc_n=f_acc_n, f_acc_l=f_acc_l, gamma=capped_digits(f_acc_l, gap == 0, M))
    if x_star is not None and x_best is not None:
        x_star = np.asarray(x_star, dtype=float)
        x_acc = float(np.linalg.norm(np.asarray(x_best, dtype=float) - x_star))
        x_acc_n = x_acc_l = None
        if x0 is not None:
            den = float(np.linalg.norm(np.asarray(x0, dtype=float) - x_star))
            if den > 0:
                x_acc_n = x_acc / den
                x_acc_l = (math.log10(x_acc) - math.log10(den)) if x_acc > 0 else -INF
        out.update(x_acc=x_acc, x_acc_n=x_acc_n, x_acc_l=x_acc_l,
                   gamma_x=capped_digits(x_acc_l, x_acc == 0, M) if x0 is not None else None)
    return AccuracyRecord(**out)


def constraint_violation_summary(g) -> tuple[float, float, float, float]:
    """(sum, squared sum, mean, product over violated) of constraint values.

    The last entry is a plain product of the positive g_i, and 1.0 when no
    constraint is violated.
    """
    g = [float(v) for v in g]
    if not g:
        raise ValidationError("constraint_violation_summary needs at least one constraint value")
    viol = [v if v > 0 else 0.0 for v in g]
    total = 0.0
    sq = 0.0
    prod = 1.0
    for v in viol:
        total += v
        sq += v * v
        if v > 0:
            prod *= v
    return total, sq, total / len(g), prod


def relative_objective_measure(f_hat: float, f_star: float, f_w: float) -> float:
    """(f_hat - f_star) / (f_w - f_star): 0 at the optimum, 1 at the worst value seen."""
    if f_w == f_star:
        raise ValidationError("degenerate denominator: worst value equals optimal value; skip this problem")
    if not (f_w >= f_hat >= f_star):
        raise ValidationError(f"expected f_w >= f_hat >= f_star, got {f_w}, {f_hat}, {f_star}")
    return (f_hat - f_star) / (f_w - f_star)


# --- profiles -------------------------------------------------------------

@dataclass(frozen=True)
class ProfileCurve:
    """Right-continuous step function sampled at ``thresholds``."""

    solver_id: str
    thresholds: tuple
    values: tuple
    kind: str = "performance"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if len(self.thresholds) != v.size:
            raise DataIntegrityError(f"{self.solver_id}: thresholds and values differ in length")
        if v.size and (np.any(v < 0) or np.any(v > 1) or np.any(np.isnan(v))):
            raise DataIntegrityError(f"{self.solver_id}: profile values outside [0, 1]")
        d = np.diff(v)
        if self.kind == "accuracy":
            if np.any(d > 0):
                raise DataIntegrityError(f"{self.solver_id}: accuracy profile must be nonincreasing")
        elif np.any(d < 0):
            raise DataIntegrityError(f"{self.solver_id}: {self.kind} profile must be nondecreasing")

    @property
    def breakpoints(self) -> list[tuple[float, float]]:
        return list(zip(self.thresholds, self.values))

    def __call__(self, t: float) -> float:
        """Value at an arbitrary threshold (last grid point at or below ``t``)."""
        idx = int(np.searchsorted(np.asarray(self.thresholds, dtype=float), t, side="right")) - 1
        if idx < 0:
            return 0.0 if self.kind != "accuracy" else 1.0
        return float(self.values[idx])

    def to_csv(self) -> str:
        lines = ["threshold,value"]
        lines += [f"{fmt_float(t)},{fmt_float(v)}" for t, v in self.breakpoints]
        return "\n".join(lines) + "\n"


def fmt_float(v) -> str:
    if v is None:
        return ""
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.17g}"


def _axes(pairs: Iterable) -> tuple[list, list]:
    problems, solvers = [], []
    for p, s in pairs:
        if p not in problems:
            problems.append(p)
        if s not in solvers:
            solvers.append(s)
    return problems, solvers


def _matrix(values: Mapping, problems, solvers, missing=INF) -> np.ndarray:
    return np.array([[float(values.get((p, s), missing)) for s in solvers] for p in problems], dtype=float)


def performance_ratios(t: Mapping, converged: Mapping) -> dict:
    """r = t / (best converged t on the same problem); inf for failed runs.

    The denominator ranges over converged runs only, so a failed run with a
    small recorded cost cannot distort the others.
    """
    problems, solvers = _axes(t)
    for key, cost in t.items():
        if cost is not None and not math.isnan(cost) and cost <= 0:
            raise DataIntegrityError(f"performance measure must be positive, got {cost!r} for {key}")
    ratios = {}
    for p in problems:
        ok = [t[(p, s)] for s in solvers if (p, s) in t and converged.get((p, s), False)]
        best = min(ok) if ok else None
        for s in solvers:
            if (p, s) not in t:
                continue
            if best is not None and converged.get((p, s), False):
                ratios[(p, s)] = t[(p, s)] / best
            else:
                ratios[(p, s)] = INF
    return ratios


def _check_grid(grid, low=None, name="grid"):
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise ValidationError(f"{name} must be a nonempty 1-D sequence")
    if np.any(np.diff(g) < 0):
        raise ValidationError(f"{name} must be sorted ascending")
    if low is not None and g[0] < low:
        raise ValidationError(f"{name} values must be >= {low}")
    return g


def _count_profile(mat: np.ndarray, grid: np.ndarray, solvers, kind: str, cmp) -> list[ProfileCurve]:
    n_problems = mat.shape[0]
    if n_problems == 0:
        raise ValidationError("profile over an empty problem set")
    curves = []
    for j, s in enumerate(solvers):
        counts = cmp(mat[:, j][:, None], grid[None, :]).sum(axis=0)
        curves.append(ProfileCurve(s, tuple(grid.tolist()), tuple((counts / n_problems).tolist()), kind))
    return curves


def performance_profile(ratios: Mapping, tau_grid) -> list[ProfileCurve]:
    """Fraction of problems with r_{p,s} <= tau, per solver."""
    grid = _check_grid(tau_grid, 1.0, "tau_grid")
    problems, solvers = _axes(ratios)
    if not problems:
        raise ValidationError("performance profile over an empty problem set")
    return _count_profile(_matrix(ratios, problems, solvers), grid, solvers, "performance", np.less_equal)


def data_profile(t_evals: Mapping, dims: Mapping, k_grid) -> list[ProfileCurve]:
    """Fraction of problems solved within k simplex gradients (k * (n_p + 1) evaluations)."""
    grid = _check_grid(k_grid, 0.0, "k_grid")
    problems, solvers = _axes(t_evals)
    if not problems:
        raise ValidationError("data profile over an empty problem set")
    missing = [p for p in problems if p not in dims]
    if missing:
        raise ValidationError(f"missing dimension for problems: {', '.join(map(str, missing))}")
    mat = _matrix(t_evals, problems, solvers)
    scale = np.array([dims[p] + 1.0 for p in problems])[:, None]
    return _count_profile(mat / scale, grid, solvers, "data", np.less_equal)


def accuracy_profile(gammas: Mapping, tau_grid) -> list[ProfileCurve]:
    """Fraction of problems on which gamma_{p,s} >= tau, per solver."""
    grid = _check_grid(tau_grid, 0.0, "tau_grid")
    problems, solvers = _axes(gammas)
    if not problems:
        raise ValidationError("accuracy profile over empty inputs")
    return _count_profile(_matrix(gammas, problems, solvers, missing=-INF), grid, solvers, "accuracy",
                          np.greater_equal)


def profile_subset(t: Mapping, converged: Mapping, solver_subset: Sequence, tau_grid) -> list[ProfileCurve]:
    """Performance profiles recomputed over a subset of solvers.

    Ratios use the best solver within the subset as denominator, which is
    the right way to compare solvers once the overall best is removed.
    """
    subset = list(solver_subset)
    if not subset:
        raise ValidationError("solver subset is empty")
    known = {s for _, s in t}
    unknown = [s for s in subset if s not in known]
    if unknown:
        raise ValidationError(f"solvers not in the table: {', '.join(unknown)}")
    keep = set(subset)
    t_sub = {k: v for k, v in t.items() if k[1] in keep}
    c_sub = {k: v for k, v in converged.items() if k[1] in keep}
    return performance_profile(performance_ratios(t_sub, c_sub), tau_grid)


def log2_tau_grid(ratios: Mapping, points: int = 101) -> np.ndarray:
    """tau grid from 1 to 2**ceil(log2 max finite ratio), log-spaced, plus every observed ratio."""
    finite = [r for r in ratios.values() if math.isfinite(r)]
    top = max([1.0] + finite)
    exp = max(1, math.ceil(math.log2(top)))
    grid = np.exp2(np.linspace(0.0, exp, points))
    return np.unique(np.concatenate([grid, finite, [1.0]]))


def linear_tau_grid(ratios: Mapping, points: int = 101) -> np.ndarray:
    finite = [r for r in ratios.values() if math.isfinite(r)]
    top = max([2.0] + finite)
    return np.unique(np.concatenate([np.linspace(1.0, top, points), finite]))


def k_grid_for(t_evals: Mapping, dims: Mapping, points: int = 101) -> np.ndarray:
    quotients = [v / (dims[p] + 1.0) for (p, _), v in t_evals.items() if math.isfinite(v)]
    top = max([1.0] + quotients)
    return np.unique(np.concatenate([np.linspace(0.0, top, points), quotients]))


def gamma_grid(M: float = DEFAULT_M, points: int = 161) -> np.ndarray:
    return np.linspace(0.0, M, points)


# --- tables ---------------------------------------------------------------

def competitive_summary(T: Mapping, factors: Sequence = DEFAULT_FACTORS) -> dict:
    """Percentage of problems where each solver's time is within c * T_min.

    Missing or infinite times (failures) are never competitive but still
    count in the denominator.
    """
    problems, solvers = _axes(T)
    for key, v in T.items():
        if v is not None and not v > 0:
            raise ValidationError(f"times must be positive, got {v!r} for {key}")
    out = {s: {} for s in solvers}
    for label, c in factors:
        hits = {s: 0 for s in solvers}
        for p in problems:
            finite = [T[(p, s)] for s in solvers if (p, s) in T and T[(p, s)] is not None
                      and math.isfinite(T[(p, s)])]
            if not finite:
                continue
            tmin = min(finite)
            for s in solvers:
                v = T.get((p, s))
                if v is not None and v <= c * tmin:
                    hits[s] += 1
        for s in solvers:
            out[s][label] = 100.0 * hits[s] / len(problems)
    return out


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Mean and sample standard deviation (0 for a single value)."""
    values = list(values)
    if len(values) == 1:
        return float(values[0]), 0.0
    return statistics.fmean(values), statistics.stdev(values)
