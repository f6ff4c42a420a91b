"""Objective definitions for the built-in suites.

Most of the classic problems are sums of squared residuals, so they are
declared as (residual, jacobian) pairs and assembled into f = r.r and
grad f = 2 J^T r. The remaining ones carry hand-written gradients.
"""

from __future__ import annotations

import math

import numpy as np

from optbench.problems.core import Problem

TWO_PI = 2.0 * math.pi


def least_squares(pid, n, residual, jacobian, x0, x_star, f_star=0.0, tags=()):
    def objective(x):
        r = residual(x)
        return float(r @ r)

    def gradient(x):
        return 2.0 * jacobian(x).T @ residual(x)

    return Problem(pid, n, objective, x0, gradient=gradient, x_star=x_star, f_star=f_star,
                   tags={"unconstrained", "least-squares", *tags})


# --- residual forms -------------------------------------------------------

def rosenbrock_r(x):
    return np.array([10.0 * (x[1] - x[0] ** 2), 1.0 - x[0]])


def rosenbrock_j(x):
    return np.array([[-20.0 * x[0], 10.0], [-1.0, 0.0]])


def ext_rosenbrock_r(x):
    odd, even = x[0::2], x[1::2]
    r = np.empty(x.size)
    r[0::2] = 10.0 * (even - odd ** 2)
    r[1::2] = 1.0 - odd
    return r


def ext_rosenbrock_j(x):
    n = x.size
    J = np.zeros((n, n))
    for k in range(0, n, 2):
        J[k, k] = -20.0 * x[k]
        J[k, k + 1] = 10.0
        J[k + 1, k] = -1.0
    return J


def freudenstein_roth_r(x):
    return np.array([
        -13.0 + x[0] + ((5.0 - x[1]) * x[1] - 2.0) * x[1],
        -29.0 + x[0] + ((x[1] + 1.0) * x[1] - 14.0) * x[1],
    ])


def freudenstein_roth_j(x):
    y = x[1]
    return np.array([[1.0, 10.0 * y - 3.0 * y ** 2 - 2.0], [1.0, 3.0 * y ** 2 + 2.0 * y - 14.0]])


def brown_badly_scaled_r(x):
    return np.array([x[0] - 1e6, x[1] - 2e-6, x[0] * x[1] - 2.0])


def brown_badly_scaled_j(x):
    return np.array([[1.0, 0.0], [0.0, 1.0], [x[1], x[0]]])


BEALE_Y = np.array([1.5, 2.25, 2.625])


def beale_r(x):
    return np.array([BEALE_Y[i] - x[0] * (1.0 - x[1] ** (i + 1)) for i in range(3)])


def beale_j(x):
    return np.array([[-(1.0 - x[1] ** (i + 1)), (i + 1) * x[0] * x[1] ** i] for i in range(3)])


def _helical_theta(x):
    if x[0] > 0:
        return math.atan(x[1] / x[0]) / TWO_PI
    if x[0] < 0:
        return math.atan(x[1] / x[0]) / TWO_PI + 0.5
    return math.copysign(0.25, x[1])


def helical_valley_r(x):
    return np.array([
        10.0 * (x[2] - 10.0 * _helical_theta(x)),
        10.0 * (math.hypot(x[0], x[1]) - 1.0),
        x[2],
    ])


def helical_valley_j(x):
    rr = x[0] ** 2 + x[1] ** 2
    rad = math.sqrt(rr)
    dth0 = -x[1] / (TWO_PI * rr)
    dth1 = x[0] / (TWO_PI * rr)
    return np.array([
        [-100.0 * dth0, -100.0 * dth1, 10.0],
        [10.0 * x[0] / rad, 10.0 * x[1] / rad, 0.0],
        [0.0, 0.0, 1.0],
    ])


S5, S10 = math.sqrt(5.0), math.sqrt(10.0)


def powell_singular_r(x):
    return np.array([
        x[0] + 10.0 * x[1],
        S5 * (x[2] - x[3]),
        (x[1] - 2.0 * x[2]) ** 2,
        S10 * (x[0] - x[3]) ** 2,
    ])


def powell_singular_j(x):
    a = x[1] - 2.0 * x[2]
    b = x[0] - x[3]
    return np.array([
        [1.0, 10.0, 0.0, 0.0],
        [0.0, 0.0, S5, -S5],
        [0.0, 2.0 * a, -4.0 * a, 0.0],
        [2.0 * S10 * b, 0.0, 0.0, -2.0 * S10 * b],
    ])


S90 = math.sqrt(90.0)


def wood_r(x):
    return np.array([
        10.0 * (x[1] - x[0] ** 2),
        1.0 - x[0],
        S90 * (x[3] - x[2] ** 2),
        1.0 - x[2],
        S10 * (x[1] + x[3] - 2.0),
        (x[1] - x[3]) / S10,
    ])


def wood_j(x):
    return np.array([
        [-20.0 * x[0], 10.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, -2.0 * S90 * x[2], S90],
        [0.0, 0.0, -1.0, 0.0],
        [0.0, S10, 0.0, S10],
        [0.0, 1.0 / S10, 0.0, -1.0 / S10],
    ])


def variably_dimensioned_r(x):
    n = x.size
    s = np.arange(1, n + 1) @ (x - 1.0)
    return np.concatenate([x - 1.0, [s, s * s]])


def variably_dimensioned_j(x):
    n = x.size
    j = np.arange(1, n + 1, dtype=float)
    s = j @ (x - 1.0)
    return np.vstack([np.eye(n), j, 2.0 * s * j])


def brown_almost_linear_r(x):
    n = x.size
    r = np.empty(n)
    r[:-1] = x[:-1] + x.sum() - (n + 1)
    r[-1] = np.prod(x) - 1.0
    return r


def brown_almost_linear_j(x):
    n = x.size
    J = np.ones((n, n)) + np.eye(n)
    J[-1] = [np.prod(np.delete(x, i)) for i in range(n)]
    return J


def linear_full_rank(m):
    def residual(x):
        t = 2.0 * x.sum() / m + 1.0
        r = np.full(m, -t)
        r[: x.size] += x
        return r

    def jacobian(x):
        n = x.size
        J = np.full((m, n), -2.0 / m)
        J[:n, :n] += np.eye(n)
        return J

    return residual, jacobian


def booth_r(x):
    return np.array([x[0] + 2.0 * x[1] - 7.0, 2.0 * x[0] + x[1] - 5.0])


def booth_j(x):
    return np.array([[1.0, 2.0], [2.0, 1.0]])


def himmelblau_r(x):
    return np.array([x[0] ** 2 + x[1] - 11.0, x[0] + x[1] ** 2 - 7.0])


def himmelblau_j(x):
    return np.array([[2.0 * x[0], 1.0], [1.0, 2.0 * x[1]]])


def dixon_price_r(x):
    i = np.arange(2, x.size + 1)
    return np.concatenate([[x[0] - 1.0], np.sqrt(i) * (2.0 * x[1:] ** 2 - x[:-1])])


def dixon_price_j(x):
    n = x.size
    J = np.zeros((n, n))
    J[0, 0] = 1.0
    for k in range(1, n):
        c = math.sqrt(k + 1)
        J[k, k] = 4.0 * c * x[k]
        J[k, k - 1] = -c
    return J


# --- general smooth functions --------------------------------------------

def sphere(x):
    return float(x @ x)


def sphere_grad(x):
    return 2.0 * x


def matyas(x):
    return 0.26 * (x[0] ** 2 + x[1] ** 2) - 0.48 * x[0] * x[1]


def matyas_grad(x):
    return np.array([0.52 * x[0] - 0.48 * x[1], 0.52 * x[1] - 0.48 * x[0]])


def three_hump_camel(x):
    a, b = x
    return 2.0 * a ** 2 - 1.05 * a ** 4 + a ** 6 / 6.0 + a * b + b ** 2


def three_hump_camel_grad(x):
    a, b = x
    return np.array([4.0 * a - 4.2 * a ** 3 + a ** 5 + b, a + 2.0 * b])


def zakharov(x):
    s = 0.5 * (np.arange(1, x.size + 1) @ x)
    return float(x @ x + s ** 2 + s ** 4)


def zakharov_grad(x):
    w = 0.5 * np.arange(1, x.size + 1)
    s = w @ x
    return 2.0 * x + (2.0 * s + 4.0 * s ** 3) * w


def trid(x):
    return float(((x - 1.0) ** 2).sum() - (x[1:] * x[:-1]).sum())


def trid_grad(x):
    g = 2.0 * (x - 1.0)
    g[1:] -= x[:-1]
    g[:-1] -= x[1:]
    return g


# --- constrained toys -----------------------------------------------------

def toy_disk():
    """min (x1-2)^2 + (x2-2)^2 s.t. x1^2 + x2^2 <= 2; solution (1, 1), f* = 2."""
    return Problem(
        "toy_disk", 2,
        lambda x: float((x[0] - 2.0) ** 2 + (x[1] - 2.0) ** 2),
        [0.0, 0.0],
        gradient=lambda x: np.array([2.0 * (x[0] - 2.0), 2.0 * (x[1] - 2.0)]),
        constraints=(lambda x: float(x[0] ** 2 + x[1] ** 2 - 2.0),),
        x_star=[1.0, 1.0], f_star=2.0, tags={"constrained"},
    )


def toy_halfplane():
    """min |x|^2 s.t. x1 + x2 >= 1; solution (0.5, 0.5), f* = 0.5."""
    return Problem(
        "toy_halfplane", 2, sphere, [0.0, 0.0], gradient=sphere_grad,
        constraints=(lambda x: float(1.0 - x[0] - x[1]),),
        x_star=[0.5, 0.5], f_star=0.5, tags={"constrained"},
    )


def toy_interval():
    """min (x-3)^2 s.t. -1 <= x <= 1; solution 1, f* = 4."""
    return Problem(
        "toy_interval", 1, lambda x: float((x[0] - 3.0) ** 2), [0.0],
        gradient=lambda x: np.array([2.0 * (x[0] - 3.0)]),
        constraints=(lambda x: float(x[0] - 1.0), lambda x: float(-x[0] - 1.0)),
        x_star=[1.0], f_star=4.0, tags={"constrained"},
    )
