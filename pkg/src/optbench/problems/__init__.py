"""Test problems, built-in suites and starting-point generation."""

from optbench.problems.core import (
    Problem,
    StartingPointSet,
    TestSet,
    evaluate,
    perturb_starting_points,
    regenerate,
    shift_problem,
)
from optbench.problems.suites import all_problems, builtin_suite, get_problem, suite_names

__all__ = [
    "Problem",
    "StartingPointSet",
    "TestSet",
    "all_problems",
    "builtin_suite",
    "evaluate",
    "get_problem",
    "perturb_starting_points",
    "regenerate",
    "shift_problem",
    "suite_names",
]
