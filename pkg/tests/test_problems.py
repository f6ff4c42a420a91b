import numpy as np
import pytest

from optbench.errors import NotFoundError, ValidationError
from optbench.problems import (
    Problem,
    StartingPointSet,
    TestSet,
    all_problems,
    builtin_suite,
    evaluate,
    get_problem,
    perturb_starting_points,
    regenerate,
    shift_problem,
    suite_names,
)
from optbench.problems import functions as fn


def test_registered_suites():
    assert {"classic20", "beale-rosenbrock", "constrained-toy"} <= set(suite_names())


def test_unknown_suite_lists_names():
    with pytest.raises(NotFoundError) as exc:
        builtin_suite("nope")
    assert "classic20" in str(exc.value)


def test_classic20_size_and_known_solutions():
    ts = builtin_suite("classic20")
    assert len(ts) >= 20 and not ts.small
    for p in ts:
        assert p.x_star is not None and p.f_star is not None
        assert p.check_known_solution(), p.id
        assert p.x_standard.shape == (p.n,)


def test_beale_and_rosenbrock_solutions():
    ts = builtin_suite("beale-rosenbrock")
    beale = ts.get("beale")
    assert list(beale.x_star) == [3.0, 0.5] and beale.f_star == 0.0
    assert beale.objective(np.array([3.0, 0.5])) == 0.0
    rb = ts.get("rosenbrock")
    assert list(rb.x_star) == [1.0, 1.0] and rb.objective(np.array([1.0, 1.0])) == 0.0
    assert ts.small


def test_constrained_toys_have_constraints():
    for p in builtin_suite("constrained-toy"):
        assert p.m >= 1
        assert p.check_known_solution()
        _, g = evaluate(p, p.x_star)
        assert np.all(g <= 1e-12)


def central_diff(f, x):
    g = np.empty_like(x)
    for i in range(x.size):
        h = 1e-5 * max(1.0, abs(x[i]))
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


@pytest.mark.parametrize("pid", sorted(all_problems()))
def test_gradients_match_finite_differences(pid):
    p = get_problem(pid)
    if not p.has_gradient:
        pytest.skip("no gradient")
    rng = np.random.default_rng(1)
    for _ in range(3):
        x = p.x_standard + rng.uniform(-0.3, 0.3, p.n)
        fd = central_diff(p.objective, x)
        g = p.gradient(x)
        scale = max(1.0, float(np.max(np.abs(fd))))
        assert np.max(np.abs(g - fd)) <= 1e-4 * scale


def test_evaluate_conventions():
    s = get_problem("sphere_2")
    f, g = evaluate(s, np.zeros(2))
    assert f == 0.0 and g.size == 0
    disk = get_problem("toy_disk")
    # x1^2 + x2^2 - 2 = 2 at (2, 0): violated by +2
    _, g = evaluate(disk, np.array([2.0, 0.0]))
    assert g[0] == 2.0
    beale = get_problem("beale")
    assert evaluate(beale, [3.0, 0.5])[0] == 0.0
    with pytest.raises(ValidationError):
        evaluate(s, np.zeros(3))


def test_evaluate_nonfinite_is_value_not_crash():
    def bad(x):
        raise ZeroDivisionError

    p = Problem("bad", 1, bad, [0.0])
    f, _ = evaluate(p, [1.0])
    assert np.isnan(f)


def test_evaluate_is_pure():
    p = get_problem("wood")
    x = np.array([0.3, -0.2, 1.1, 0.7])
    a = evaluate(p, x)[0]
    b = evaluate(p, x)[0]
    assert np.float64(a).tobytes() == np.float64(b).tobytes()


def test_problem_invariants():
    with pytest.raises(ValidationError):
        Problem("x", 2, fn.sphere, [0.0, 0.0], x_star=[0.0, 0.0], f_star=1.0)
    with pytest.raises(ValidationError):
        Problem("x", 2, fn.sphere, [0.0])
    with pytest.raises(ValidationError):
        TestSet("t", (get_problem("sphere_2"), get_problem("sphere_2")))
    with pytest.raises(ValidationError):
        TestSet("t", ())


def test_shift_sphere_moves_minimizer():
    s = shift_problem(get_problem("sphere_2"), [1.0, 1.0])
    assert list(s.x_star) == [1.0, 1.0] and s.f_star == 0.0
    assert s.objective(np.array([1.0, 1.0])) == 0.0
    assert s.id == "sphere_2+shift"


def test_zero_shift_is_identity():
    p = get_problem("rosenbrock")
    s = shift_problem(p, np.zeros(2))
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.normal(size=2)
        assert s.objective(x) == p.objective(x)


def test_beale_shift_probe_points():
    p = get_problem("beale")
    shift = np.array([2.0, -1.0])
    s = shift_problem(p, shift)
    assert s.objective(p.x_standard + shift) == p.objective(p.x_standard)
    rng = np.random.default_rng(3)
    for _ in range(100):
        x = rng.uniform(-3, 3, 2)
        assert abs(s.objective(x + shift) - p.objective(x)) <= 1e-12 * max(1.0, abs(p.objective(x)))


def test_shift_consistency_all_problems():
    rng = np.random.default_rng(5)
    for p in all_problems().values():
        shift = rng.integers(-4, 5, p.n) / 4.0
        s = shift_problem(p, shift)
        assert abs(s.objective(s.x_star) - p.f_star) <= 1e-10 * max(1.0, abs(p.f_star))
        if p.m:
            np.testing.assert_array_equal(evaluate(s, s.x_star)[1], evaluate(p, p.x_star)[1])


def test_shift_dimension_mismatch():
    with pytest.raises(ValidationError):
        shift_problem(get_problem("sphere_2"), [1.0])


def test_perturb_radius_zero_copies():
    p = get_problem("beale")
    sps = perturb_starting_points(p, 0.0, 5, seed=1)
    assert len(sps.points) == 5
    for _, x in sps.points:
        assert np.array_equal(x, p.x_standard)


def test_perturb_deterministic_and_first_is_standard():
    p = get_problem("rosenbrock")
    a = perturb_starting_points(p, 0.5, 10, seed=42)
    b = perturb_starting_points(p, 0.5, 10, seed=42)
    assert a.ids() == b.ids() and a.ids()[0] == "s0"
    assert np.array_equal(a.get("s0"), p.x_standard)
    for (_, x), (_, y) in zip(a.points, b.points):
        assert x.tobytes() == y.tobytes()
    c = perturb_starting_points(p, 0.5, 10, seed=43)
    assert not np.array_equal(a.get("s1"), c.get("s1"))


def test_perturb_box_on_beale():
    p = get_problem("beale")
    assert list(p.x_standard) == [1.0, 1.0]
    sps = perturb_starting_points(p, 0.01, 1000, seed=7)
    pts = np.array([x for _, x in sps.points])
    assert np.max(np.abs(pts - [1.0, 1.0])) <= 0.01


def test_regeneration_is_bit_identical():
    p = get_problem("wood")
    sps = perturb_starting_points(p, 0.25, 6, seed=11)
    again = regenerate(p, StartingPointSet.from_dict(sps.to_dict()))
    for (ia, xa), (ib, xb) in zip(sps.points, again.points):
        assert ia == ib and xa.tobytes() == xb.tobytes()


def test_perturb_rejects_bad_count():
    with pytest.raises(ValidationError):
        perturb_starting_points(get_problem("beale"), 0.1, 0, seed=0)


def test_manifest_fields():
    m = get_problem("toy_disk").manifest()
    assert set(m) == {"id", "n", "m", "has_gradient", "x_standard", "x_star", "f_star", "tags"}
    assert m["m"] == 1
