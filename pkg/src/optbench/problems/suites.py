"""Registry of compiled-in test suites."""

from __future__ import annotations

import numpy as np

from optbench.errors import NotFoundError
from optbench.problems import functions as fn
from optbench.problems.core import Problem, TestSet


def rosenbrock() -> Problem:
    return fn.least_squares("rosenbrock", 2, fn.rosenbrock_r, fn.rosenbrock_j, [-1.2, 1.0], [1.0, 1.0],
                            tags={"family:rosenbrock"})


def beale() -> Problem:
    # (1, 1) is the customary start for Beale
    return fn.least_squares("beale", 2, fn.beale_r, fn.beale_j, [1.0, 1.0], [3.0, 0.5])


def sphere(n: int) -> Problem:
    return Problem(f"sphere_{n}", n, fn.sphere, np.ones(n), gradient=fn.sphere_grad, x_star=np.zeros(n),
                   f_star=0.0, tags={"unconstrained", "family:sphere"})


def ext_rosenbrock(n: int) -> Problem:
    x0 = np.tile([-1.2, 1.0], n // 2)
    return fn.least_squares(f"ext_rosenbrock_{n}", n, fn.ext_rosenbrock_r, fn.ext_rosenbrock_j, x0, np.ones(n),
                            tags={"family:rosenbrock"})


def _classic20() -> list[Problem]:
    lfr_r, lfr_j = fn.linear_full_rank(6)
    return [
        rosenbrock(),
        fn.least_squares("freudenstein_roth", 2, fn.freudenstein_roth_r, fn.freudenstein_roth_j,
                         [0.5, -2.0], [5.0, 4.0], tags={"hard"}),
        fn.least_squares("brown_badly_scaled", 2, fn.brown_badly_scaled_r, fn.brown_badly_scaled_j,
                         [1.0, 1.0], [1e6, 2e-6], tags={"badly-scaled"}),
        beale(),
        fn.least_squares("helical_valley", 3, fn.helical_valley_r, fn.helical_valley_j,
                         [-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]),
        fn.least_squares("powell_singular", 4, fn.powell_singular_r, fn.powell_singular_j,
                         [3.0, -1.0, 0.0, 1.0], np.zeros(4), tags={"singular"}),
        fn.least_squares("wood", 4, fn.wood_r, fn.wood_j, [-3.0, -1.0, -3.0, -1.0], np.ones(4)),
        fn.least_squares("variably_dimensioned", 4, fn.variably_dimensioned_r, fn.variably_dimensioned_j,
                         1.0 - np.arange(1, 5) / 4.0, np.ones(4)),
        fn.least_squares("brown_almost_linear", 5, fn.brown_almost_linear_r, fn.brown_almost_linear_j,
                         np.full(5, 0.5), np.ones(5)),
        fn.least_squares("linear_full_rank", 4, lfr_r, lfr_j, np.ones(4), -np.ones(4), f_star=2.0),
        sphere(2),
        sphere(4),
        sphere(8),
        fn.least_squares("booth", 2, fn.booth_r, fn.booth_j, [0.0, 0.0], [1.0, 3.0]),
        fn.least_squares("himmelblau", 2, fn.himmelblau_r, fn.himmelblau_j, [0.0, 0.0], [3.0, 2.0],
                         tags={"multimodal"}),
        Problem("matyas", 2, fn.matyas, [1.0, -1.0], gradient=fn.matyas_grad, x_star=[0.0, 0.0], f_star=0.0,
                tags={"unconstrained"}),
        Problem("three_hump_camel", 2, fn.three_hump_camel, [1.0, 1.0], gradient=fn.three_hump_camel_grad,
                x_star=[0.0, 0.0], f_star=0.0, tags={"unconstrained", "multimodal"}),
        Problem("zakharov", 3, fn.zakharov, np.ones(3), gradient=fn.zakharov_grad, x_star=np.zeros(3),
                f_star=0.0, tags={"unconstrained"}),
        fn.least_squares("dixon_price", 2, fn.dixon_price_r, fn.dixon_price_j, [2.0, 2.0],
                         [1.0, 2.0 ** -0.5]),
        Problem("trid", 4, fn.trid, np.zeros(4), gradient=fn.trid_grad, x_star=[4.0, 6.0, 6.0, 4.0],
                f_star=-16.0, tags={"unconstrained"}),
        ext_rosenbrock(4),
        ext_rosenbrock(8),
    ]


SUITES = {
    "classic20": _classic20,
    "beale-rosenbrock": lambda: [beale(), rosenbrock()],
    "constrained-toy": lambda: [fn.toy_disk(), fn.toy_halfplane(), fn.toy_interval()],
}


def suite_names() -> list[str]:
    return list(SUITES)


def builtin_suite(name: str) -> TestSet:
    try:
        factory = SUITES[name]
    except KeyError:
        raise NotFoundError(f"unknown suite {name!r}; registered suites: {', '.join(SUITES)}") from None
    return TestSet(name, tuple(factory()))


def all_problems() -> dict[str, Problem]:
    """Every built-in problem keyed by id (first suite wins on duplicates)."""
    out: dict[str, Problem] = {}
    for name in SUITES:
        for p in builtin_suite(name):
            out.setdefault(p.id, p)
    return out


def get_problem(problem_id: str) -> Problem:
    problems = all_problems()
    if problem_id in problems:
        return problems[problem_id]
    raise NotFoundError(f"unknown problem {problem_id!r}")
