import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from colocov.depth_metrics import (
    coral_align,
    coverage_mae,
    dom,
    dr_mre,
    evaluate_depth,
    mre,
    mre_objective,
    resolve_epsilon,
    weighted_median,
)
from colocov.errors import DegenerateCovarianceError


def step_edge(n=16, col=8, lo=1.0, hi=10.0):
    g = np.full((n, n), lo)
    g[:, col:] = hi
    p = g.copy()
    p[:, :-1] = g[:, 1:]  # shifted one column left
    return p, g


def test_mre_examples():
    m, s = mre(np.array([[1.0, 1.0]]), np.array([[1.0, 2.0]]), epsilon=1e-3)
    assert s == 1.0 and m == 0.25
    g = np.arange(1.0, 10.0).reshape(3, 3)
    m, s = mre(2.5 * g, g)
    assert m == pytest.approx(0.0, abs=1e-15) and s == pytest.approx(0.4)
    m, s = mre(np.array([[3.0]]), np.array([[7.0]]))
    assert m == 0.0 and s == pytest.approx(7 / 3)


def test_mre_grid_example():
    grid = np.arange(0.5, 3.0 + 1e-12, 1e-5)
    f = mre_objective(grid, np.array([1.0, 1.0]), np.array([1.0, 2.0]), 1e-3)
    assert grid[np.argmin(f)] == pytest.approx(1.0, abs=1e-5)
    assert f.min() == pytest.approx(0.25, abs=1e-9)


def test_input_validation():
    with pytest.raises(ValueError):
        mre(np.zeros((2, 2)), np.ones((2, 2)))
    with pytest.raises(ValueError):
        mre(np.ones((2, 2)), np.ones((2, 3)))
    with pytest.raises(ValueError):
        mre(-np.ones((2, 2)), np.ones((2, 2)))
    with pytest.raises(ValueError):
        dr_mre(np.ones((2, 5)), np.ones((2, 5)))
    with pytest.raises(ValueError):
        resolve_epsilon(np.ones(3), 0.0)
    with pytest.raises(ValueError):
        mre(np.ones((2, 2)), np.ones((2, 2)), mode="median")
    assert resolve_epsilon(np.array([1.0, 2.0, 3.0])) == pytest.approx(2e-3)


def test_per_image_mode():
    g = [np.full((3, 3), 2.0), np.full((3, 3), 5.0)]
    p = [np.full((3, 3), 1.0), np.full((3, 3), 1.0)]
    m, s = mre(p, g, mode="per_image")
    assert m == 0.0 and s == pytest.approx(3.5)
    assert mre(p, g)[0] > 0


def test_weighted_median_definition():
    assert weighted_median(np.array([3.0, 1.0, 2.0]), np.array([1.0, 1.0, 1.0])) == 2.0
    assert weighted_median(np.array([1.0, 2.0]), np.array([1.0, 1.0])) == 1.0
    assert weighted_median(np.array([1.0, 2.0]), np.array([1.0, 3.0])) == 2.0


def test_step_edge_dr_mre():
    p, g = step_edge()
    assert mre(p, g)[0] > 0.1
    assert dr_mre(p, g)[0] <= 1e-6
    assert dr_mre(g, g)[0] == 0.0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_dr_mre_never_exceeds_mre(seed):
    rng = np.random.default_rng(seed)
    h, w = rng.integers(3, 12, 2)
    g = rng.uniform(0.5, 20, (h, w))
    p = g * rng.uniform(0.3, 3) * rng.lognormal(0, 0.3, (h, w))
    assert dr_mre(p, g)[0] <= mre(p, g)[0] + 1e-15


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.1, 1.0, 17.3]))
def test_mre_scale_invariance(seed, c):
    rng = np.random.default_rng(seed)
    g = rng.uniform(0.5, 20, (6, 7))
    p = g * rng.lognormal(0, 0.4, g.shape)
    assert abs(mre(c * p, g)[0] - mre(p, g)[0]) <= 1e-9


def test_dom_examples():
    assert dom(np.array([1.0, 3.0, 2.0]), np.array([1.0, 2.0, 3.0]), exhaustive=True) == pytest.approx(2 / 3)
    g = np.arange(50.0)
    assert dom(g, g) == 1.0
    assert dom(-g, g) == 0.0
    with pytest.raises(ValueError):
        dom(np.ones(1), np.ones(1))
    with pytest.raises(ValueError):
        dom(g, g, n_pairs=0)


def test_dom_sampled_close_to_exhaustive(rng):
    g = rng.uniform(1, 10, (8, 8))
    p = g + rng.normal(0, 2, g.shape)
    assert abs(dom(p, g, exhaustive=True) - dom(p, g, 100_000, seed=3)) <= 0.01


def test_dom_monotone_invariance(rng):
    g = rng.uniform(1, 10, (10, 10))
    p = g + rng.normal(0, 1, g.shape)
    assert dom(np.exp(p) + 2.0, g, 5000, seed=9) == dom(p, g, 5000, seed=9)


def test_dom_deterministic_in_seed(rng):
    g = rng.uniform(1, 10, 200)
    p = g + rng.normal(0, 3, 200)
    assert dom(p, g, 1000, seed=4) == dom(p, g, 1000, seed=4)


def test_evaluate_depth_report(rng):
    g = rng.uniform(1, 10, (12, 12))
    r = evaluate_depth(0.5 * g, g)
    assert r.mre == pytest.approx(0.0, abs=1e-12) and r.dom == 1.0 and r.sigma == pytest.approx(2.0)
    assert r.dr_mre <= r.mre


def test_coverage_mae():
    assert coverage_mae([0.2, 0.9], [0.2, 0.9]) == 0.0
    assert coverage_mae([0.5], [0.677]) == pytest.approx(0.177)
    rng = np.random.default_rng(0)
    a, b = rng.uniform(size=40), rng.uniform(size=40)
    assert coverage_mae(a, b) == pytest.approx(sum(abs(x - y) for x, y in zip(a, b)) / 40)
    with pytest.raises(ValueError):
        coverage_mae([0.1], [0.1, 0.2])
    with pytest.raises(ValueError):
        coverage_mae([1.2], [0.1])


def test_coral_identity_and_1d():
    X = np.random.default_rng(0).normal(size=(200, 4))
    amap, _ = coral_align(X, X)
    np.testing.assert_allclose(amap.matrix, np.eye(4), atol=1e-9)
    np.testing.assert_allclose(amap.shift, 0.0, atol=1e-9)
    # mean 2, variance 16 (sample) -> mean 0, variance 1
    src = np.array([2 - 4 * np.sqrt(1.5), 2.0, 2.0, 2 + 4 * np.sqrt(1.5)])
    tgt = np.array([-np.sqrt(1.5), 0.0, 0.0, np.sqrt(1.5)])
    amap, _ = coral_align(src, tgt)
    assert amap([[6.0]])[0, 0] == pytest.approx(1.0, abs=1e-12)


def test_coral_errors():
    with pytest.raises(ValueError):
        coral_align(np.ones((2, 3)), np.ones((10, 3)))
    with pytest.raises(DegenerateCovarianceError):
        coral_align(np.ones((10, 2)), np.random.default_rng(0).normal(size=(10, 2)))
