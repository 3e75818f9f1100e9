import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from somogsa import problems as P
from somogsa.exceptions import CapabilityError, DimensionError, NumericError, ValidationError

SUITE_IDS = ["sphere", "bimodal_example", "ellipsoid", "rastrigin", "weierstrass", "gallagher"]


def fd_oracle(f, x, h=1e-5):
    # plain central differences, independent of problems.gradient
    g = np.empty(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def test_suite_membership_and_order():
    assert [p.id for p in P.make_suite()] == SUITE_IDS
    ids = [p.id for p in P.make_suite(include_plateau=True)]
    assert ids[-2:] == ["bueche_rastrigin", "step_ellipsoid"]


def test_bimodal_rounded_values():
    f = P.bimodal_example()
    assert abs(P.evaluate(f, (-1.63, 0.0)) - (-4.86)) <= 0.01
    assert abs(P.evaluate(f, (1.53, 0.0)) - (-1.69)) <= 0.01
    x_opt, f_opt = f.known_optimum
    assert np.allclose(x_opt, (-1.63, 0.0), atol=1e-2)
    assert abs(f_opt - (-4.86)) <= 1e-2


def test_bimodal_optima_are_stationary():
    # x^4 - 5x^2 + x has derivative 4x^3 - 10x + 1
    f = P.bimodal_example()
    for x_star, _ in (f.known_optimum, P.bimodal_local_optimum()):
        x1 = x_star[0]
        assert abs(4 * x1**3 - 10 * x1 + 1) < 1e-10
        assert x_star[1] == 0.0


def test_canonical_values():
    assert P.evaluate(P.rastrigin(), (0.0, 0.0)) == 0.0
    assert P.evaluate(P.sphere(), (0.0, 0.0)) == pytest.approx(18.5, abs=1e-12)
    assert np.array_equal(P.gradient(P.sphere(), (-3.5, -2.5)).grad, [0.0, 0.0])
    assert np.allclose(P.gradient(P.sphere(), (0.0, 0.0)).grad, [7.0, 5.0])


@pytest.mark.parametrize("problem", P.make_suite(include_plateau=True), ids=lambda p: p.id)
def test_known_optimum_consistent(problem):
    x_opt, f_opt = problem.known_optimum
    assert P.evaluate(problem, x_opt) == pytest.approx(f_opt, rel=1e-12, abs=1e-12)
    assert P.evaluate(problem, (0.0, 0.0)) is not None


@pytest.mark.parametrize("problem", [p for p in P.make_suite() if p.id != "weierstrass"], ids=lambda p: p.id)
def test_known_optimum_is_local_min(problem):
    x_opt, f_opt = problem.known_optimum
    rng = np.random.default_rng(3)
    d = rng.standard_normal((1000, problem.dim))
    d *= 1e-4 / np.linalg.norm(d, axis=1, keepdims=True)
    vals = problem.evaluator(x_opt + d)
    assert np.all(vals >= f_opt - 1e-12)


def test_weierstrass_integer_minima():
    f = P.weierstrass()
    rng = np.random.default_rng(5)
    for _ in range(20):
        z = rng.integers(-4, 5, size=2).astype(float)
        assert P.evaluate(f, z) == pytest.approx(0.0, abs=1e-12)
        d = rng.standard_normal((200, 2))
        d *= 1e-4 / np.linalg.norm(d, axis=1, keepdims=True)
        assert np.all(f.evaluator(z + d) >= -1e-12)


def test_evaluate_deterministic_and_dimension_checked():
    f = P.gallagher()
    x = np.array([0.3, -1.7])
    assert P.evaluate(f, x) == P.evaluate(f, x.copy())
    with pytest.raises(DimensionError):
        P.evaluate(f, (1.0, 2.0, 3.0))


def test_nonfinite_value_raises_with_point():
    bad = P.ScalarProblem("bad", 2, (-5, 5), lambda x: np.nan)
    with pytest.raises(NumericError) as info:
        P.evaluate(bad, (1.0, 1.0))
    assert np.array_equal(info.value.x, [1.0, 1.0])


def test_central_fd_counts_and_capability():
    f = P.bimodal_example()
    r = P.gradient(f, (0.5, 0.5), "central_fd")
    assert r.evals == 4 and not r.one_sided
    with pytest.raises(CapabilityError):
        P.gradient(P.step_ellipsoid(), (0.5, 0.5), "analytic")


def test_one_sided_fallback_at_boundary():
    f = P.sphere()
    r = P.gradient(f, (5.0, 0.0), "central_fd")
    assert r.one_sided
    # one shared center evaluation, one for the boundary axis, two for the interior axis
    assert r.evals == 4
    assert np.allclose(r.grad, [17.0, 5.0], atol=1e-4)


def test_fourth_order_fd_is_tighter():
    f = P.weierstrass()
    x = np.array([0.37, -1.21])
    exact = f.analytic_gradient(x)
    e2 = np.linalg.norm(P.gradient(f, x, "central_fd").grad - exact)
    r4 = P.gradient(f, x, "central_fd4")
    assert r4.evals == 8
    assert np.linalg.norm(r4.grad - exact) < 1e-2 * e2


@pytest.mark.parametrize("problem", [p for p in P.make_suite(include_plateau=True) if p.has_analytic_gradient], ids=lambda p: p.id)
def test_analytic_matches_fd_oracle(problem):
    rng = np.random.default_rng(11)
    for x in rng.uniform(-4.9, 4.9, size=(100, problem.dim)):
        g = problem.analytic_gradient(x)
        fd = fd_oracle(problem.evaluator, x)
        assert np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1.0) < 1e-5


@pytest.mark.parametrize("problem", P.make_suite(), ids=lambda p: p.id)
def test_gradient_many_matches_pointwise(problem):
    X = np.random.default_rng(2).uniform(-4, 4, size=(7, 5, 2))
    for mode in ("analytic", "central_fd"):
        G = P.gradient_many(problem, X, mode)
        for idx in np.ndindex(7, 5):
            assert np.allclose(G[idx], P.gradient(problem, X[idx], mode).grad, rtol=1e-9, atol=1e-9)


def test_describe_is_json():
    doc = [p.describe() for p in P.make_suite()]
    text = json.dumps(doc)
    assert json.loads(text)[1]["id"] == "bimodal_example"
    assert set(doc[0]) == {"id", "dim", "bounds", "has_analytic_gradient", "f_opt"}


def test_bounds_validated():
    with pytest.raises(ValidationError):
        P.ScalarProblem("x", 2, [(1, 0), (0, 1)], lambda x: 0.0)


# instances -----------------------------------------------------------------


def test_identity_instance_is_pointwise_equal():
    f = P.rastrigin()
    g = P.apply_instance(f, P.InstanceSpec.identity(2))
    X = np.random.default_rng(0).uniform(-5, 5, size=(50, 2))
    assert np.array_equal(g.evaluator(X), f.evaluator(X))


def test_shift_moves_sphere_optimum():
    f = P.sphere((0.0, 0.0))
    g = P.apply_instance(f, P.InstanceSpec(1, (1.0, 1.0), np.eye(2), 0.0))
    x_opt, f_opt = g.known_optimum
    assert np.allclose(x_opt, (1.0, 1.0)) and f_opt == 0.0
    assert P.evaluate(g, (1.0, 1.0)) == 0.0


def test_instance_determinism_and_orthonormality():
    f = P.gallagher()
    a, b = P.make_instance(f, 7), P.make_instance(f, 7)
    assert np.array_equal(a.rotation, b.rotation) and np.array_equal(a.shift, b.shift)
    R = a.rotation
    assert np.max(np.abs(R.T @ R - np.eye(2))) <= 1e-10


def test_non_orthonormal_rotation_rejected():
    with pytest.raises(ValidationError):
        P.apply_instance(P.rastrigin(), P.InstanceSpec(1, (0.0, 0.0), [[1.0, 0.2], [0.0, 1.0]]))


@pytest.mark.parametrize("seed", range(1, 16))
def test_instance_optimum_consistent(seed):
    for base in P.make_suite():
        inst = P.instantiate(base, seed)
        x_opt, f_opt = inst.known_optimum
        assert inst.contains(x_opt)
        assert P.evaluate(inst, x_opt) == pytest.approx(f_opt, rel=1e-12, abs=1e-10)
        if inst.has_analytic_gradient:
            x = np.array([0.4, -0.9])
            assert np.allclose(inst.analytic_gradient(x), fd_oracle(inst.evaluator, x), rtol=1e-5, atol=1e-5)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 15), st.lists(st.floats(-5, 5), min_size=2, max_size=2))
def test_instance_value_identity(seed, z):
    # f_inst(R^-1 z + shift) = f(z) + offset
    base = P.rastrigin()
    spec = P.make_instance(base, seed)
    inst = P.apply_instance(base, spec)
    z = np.array(z)
    x = spec.rotation.T @ z + spec.shift
    assert P.evaluate(inst, x) == pytest.approx(P.evaluate(base, z) + spec.value_offset, abs=1e-9)
