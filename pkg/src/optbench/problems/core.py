"""Test-problem model, starting points and the shift transformation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from optbench.errors import ValidationError

Vector = np.ndarray
ScalarFn = Callable[[Vector], float]
GradFn = Callable[[Vector], Vector]

MIN_RECOMMENDED_PROBLEMS = 20


def _frozen(x) -> Vector:
    arr = np.array(x, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Problem:
    """An unconstrained or inequality-constrained minimization problem.

    Constraints follow the convention ``g_i(x) <= 0`` is feasible.
    ``x_star`` and ``f_star`` are independently optional: value-based
    quality measures need the latter, point-based ones the former.
    """

    id: str
    n: int
    objective: ScalarFn
    x_standard: Vector
    gradient: Optional[GradFn] = None
    constraints: tuple[ScalarFn, ...] = ()
    x_star: Optional[Vector] = None
    f_star: Optional[float] = None
    tags: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"{self.id}: dimension must be positive, got {self.n}")
        object.__setattr__(self, "x_standard", _frozen(self.x_standard))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(self, "tags", frozenset(self.tags))
        if self.x_standard.shape != (self.n,):
            raise ValidationError(f"{self.id}: x_standard has length {self.x_standard.size}, expected {self.n}")
        if self.x_star is not None:
            object.__setattr__(self, "x_star", _frozen(self.x_star))
            if self.x_star.shape != (self.n,):
                raise ValidationError(f"{self.id}: x_star has length {self.x_star.size}, expected {self.n}")
        if self.f_star is not None:
            object.__setattr__(self, "f_star", float(self.f_star))
        if not self.check_known_solution():
            raise ValidationError(f"{self.id}: objective(x_star) disagrees with f_star={self.f_star!r}")

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def has_gradient(self) -> bool:
        return self.gradient is not None

    @property
    def family(self) -> Optional[str]:
        """Family name from a ``family:<name>`` tag, used to group sizes."""
        for tag in sorted(self.tags):
            if tag.startswith("family:"):
                return tag.split(":", 1)[1]
        return None

    def check_known_solution(self, rtol: float = 1e-10) -> bool:
        """True when objective(x_star) agrees with f_star (or either is absent)."""
        if self.x_star is None or self.f_star is None:
            return True
        f = self.objective(np.array(self.x_star))
        return abs(f - self.f_star) <= rtol * max(1.0, abs(self.f_star))

    def manifest(self) -> dict:
        return {
            "id": self.id,
            "n": self.n,
            "m": self.m,
            "has_gradient": self.has_gradient,
            "x_standard": [float(v) for v in self.x_standard],
            "x_star": None if self.x_star is None else [float(v) for v in self.x_star],
            "f_star": self.f_star,
            "tags": sorted(self.tags),
        }


@dataclass(frozen=True)
class TestSet:
    """An ordered collection of problems with unique ids."""

    __test__ = False  # not a pytest class

    id: str
    problems: tuple[Problem, ...]

    def __post_init__(self):
        object.__setattr__(self, "problems", tuple(self.problems))
        if not self.problems:
            raise ValidationError(f"test set {self.id!r} is empty")
        ids = [p.id for p in self.problems]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise ValidationError(f"test set {self.id!r} has duplicate problem ids: {dupes}")

    @property
    def small(self) -> bool:
        """Warning flag: fewer problems than the customary minimum of 20."""
        return len(self.problems) < MIN_RECOMMENDED_PROBLEMS

    def __len__(self):
        return len(self.problems)

    def __iter__(self):
        return iter(self.problems)

    def get(self, problem_id: str) -> Problem:
        for p in self.problems:
            if p.id == problem_id:
                return p
        raise KeyError(problem_id)


@dataclass(frozen=True)
class StartingPointSet:
    """Starting points for one problem plus the recipe that produced them."""

    problem_id: str
    points: tuple[tuple[str, Vector], ...]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "points", tuple((sid, _frozen(x)) for sid, x in self.points))

    def ids(self) -> list[str]:
        return [sid for sid, _ in self.points]

    def get(self, start_id: str) -> Vector:
        for sid, x in self.points:
            if sid == start_id:
                return x
        raise KeyError(start_id)

    def to_dict(self) -> dict:
        return {
            "problem_id": self.problem_id,
            "points": [{"id": sid, "x": [float(v) for v in x]} for sid, x in self.points],
            "provenance": dict(self.provenance),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StartingPointSet":
        return cls(d["problem_id"], tuple((pt["id"], pt["x"]) for pt in d["points"]), dict(d.get("provenance", {})))


def evaluate(p: Problem, x) -> tuple[float, Vector]:
    """Objective and constraint values at ``x``.

    Arithmetic failures do not raise: they come back as a NaN objective so
    the caller can record an evaluation failure.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (p.n,):
        raise ValidationError(f"{p.id}: expected a point of length {p.n}, got shape {x.shape}")
    with np.errstate(all="ignore"):
        try:
            f = float(p.objective(x))
        except (ArithmeticError, ValueError):
            f = math.nan
        g = np.empty(p.m)
        for i, gi in enumerate(p.constraints):
            try:
                g[i] = float(gi(x))
            except (ArithmeticError, ValueError):
                g[i] = math.nan
    return f, g


def shift_problem(p: Problem, shift) -> Problem:
    """Translate the whole problem by ``shift``.

    The objective becomes x -> f(x - shift), likewise every constraint; the
    standard start and the known minimizer move by +shift so that a run from
    the shifted start is an exact translate of the original run.
    """
    shift = np.array(shift, dtype=float).reshape(-1)
    if shift.shape != (p.n,):
        raise ValidationError(f"{p.id}: shift has length {shift.size}, expected {p.n}")
    shift.setflags(write=False)
    f = p.objective
    grad = p.gradient

    def objective(x, _f=f):
        return _f(x - shift)

    def shifted_constraint(gi):
        return lambda x: gi(x - shift)

    def shifted_gradient(x, _g=grad):
        return _g(x - shift)

    return Problem(
        id=p.id + "+shift",
        n=p.n,
        objective=objective,
        x_standard=p.x_standard + shift,
        gradient=None if grad is None else shifted_gradient,
        constraints=tuple(shifted_constraint(gi) for gi in p.constraints),
        x_star=None if p.x_star is None else p.x_star + shift,
        f_star=p.f_star,
        tags=p.tags | {"shifted"},
    )


def perturb_starting_points(p: Problem, radius: float, count: int, seed: int) -> StartingPointSet:
    """``count`` starts: x_standard itself, then uniform draws from the box x_standard +- radius."""
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}")
    if radius < 0:
        raise ValidationError(f"radius must be nonnegative, got {radius}")
    rng = np.random.default_rng(seed)
    points = [("s0", p.x_standard.copy())]
    for k in range(1, count):
        offset = rng.uniform(-radius, radius, size=p.n) if radius > 0 else np.zeros(p.n)
        points.append((f"s{k}", p.x_standard + offset))
    provenance = {"master_seed": int(seed), "radius": float(radius), "count": int(count), "rule": "uniform-box"}
    return StartingPointSet(p.id, tuple(points), provenance)


def regenerate(p: Problem, sps: StartingPointSet) -> StartingPointSet:
    """Rebuild a starting-point set from its recorded provenance."""
    prov = sps.provenance
    if prov.get("rule") != "uniform-box":
        raise ValidationError(f"cannot regenerate starting points with rule {prov.get('rule')!r}")
    return perturb_starting_points(p, prov["radius"], prov["count"], prov["master_seed"])

