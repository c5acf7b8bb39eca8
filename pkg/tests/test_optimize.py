import numpy as np
import pytest
from scipy.optimize import minimize

from median_meta.optimize import STATUS_MAXITER, minimize_box


def rosen(X, idx):
    return (1 - X[:, 0]) ** 2 + 100 * (X[:, 1] - X[:, 0] ** 2) ** 2


def quad_targets(targets):
    targets = np.asarray(targets, dtype=float)

    def fun(X, idx):
        return np.sum((X - targets[idx]) ** 2, axis=1)
    return fun


def test_unconstrained_minimum_inside_box():
    res = minimize_box(rosen, [[-1.2, 1.0]], [[-5, -5]], [[5, 5]], max_iter=2000)
    assert res.converged[0]
    np.testing.assert_allclose(res.x[0], [1, 1], atol=1e-4)


def test_active_bounds():
    fun = quad_targets([[3.0, -2.0]])
    res = minimize_box(fun, [[0.5, 0.5]], [[0, 0]], [[1, 1]])
    np.testing.assert_allclose(res.x[0], [1, 0], atol=1e-12)
    assert res.fun[0] == pytest.approx(4 + 4)


def test_start_outside_box_is_clipped():
    fun = quad_targets([[0.2, 0.3]])
    res = minimize_box(fun, [[10.0, -10.0]], [[0, 0]], [[1, 1]])
    np.testing.assert_allclose(res.x[0], [0.2, 0.3], atol=1e-6)


def test_batched_problems_are_independent():
    rng = np.random.default_rng(0)
    targets = rng.uniform(-2, 2, (6, 2))
    x0 = rng.uniform(-3, 3, (6, 2))
    lo, hi = np.full((6, 2), -1.5), np.full((6, 2), 1.5)
    together = minimize_box(quad_targets(targets), x0, lo, hi)
    for i in range(6):
        alone = minimize_box(quad_targets(targets[i:i + 1]), x0[i:i + 1], lo[i:i + 1], hi[i:i + 1])
        np.testing.assert_array_equal(alone.x[0], together.x[i])
        assert alone.fun[0] == together.fun[i]


def test_matches_or_beats_scipy_lbfgsb():
    rng = np.random.default_rng(1)
    for _ in range(10):
        a, b = rng.uniform(0.5, 2, 2)

        def f(x):
            return (x[0] - a) ** 4 + (x[0] * x[1] - b) ** 2 + 0.1 * (x[1] - 1) ** 2

        x0 = rng.uniform(0.1, 3, 2)
        ref = minimize(f, x0, method="L-BFGS-B", bounds=[(0.1, 3), (0.1, 3)])
        ours = minimize_box(lambda X, idx: np.array([f(x) for x in X]),
                            [x0], [[0.1, 0.1]], [[3, 3]], max_iter=1000)
        assert ours.fun[0] <= ref.fun + 1e-8


def test_nonfinite_regions_are_avoided():
    def fun(X, idx):
        out = (X[:, 0] - 0.5) ** 2 + (X[:, 1] - 0.5) ** 2
        return np.where(X[:, 0] > 0.9, np.nan, out)
    res = minimize_box(fun, [[0.85, 0.1]], [[0, 0]], [[1, 1]])
    assert res.converged[0]
    np.testing.assert_allclose(res.x[0], [0.5, 0.5], atol=1e-5)


def test_max_iter_reported():
    res = minimize_box(rosen, [[-1.2, 1.0]], [[-5, -5]], [[5, 5]], max_iter=3)
    assert res.status[0] == STATUS_MAXITER
    assert not res.converged[0]
