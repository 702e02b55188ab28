import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrom.errors import ConfigError, NumericError
from lrom.rbf import rbf_eval, rbf_fit, rbf_gradient, saddle_matrix


def centers2d(rng, n=40):
    return rng.uniform([0.5, 0.25], [1.5, 0.35], size=(n, 2))


def test_constant_targets(rng):
    c = centers2d(rng)
    r = rbf_fit(c, np.full((40, 1), 2.5))
    assert np.max(np.abs(r.weights)) <= 1e-9
    np.testing.assert_allclose(rbf_eval(r, rng.uniform([0.5, 0.25], [1.5, 0.35], (20, 2))), 2.5, rtol=1e-12)


def test_linear_reproduction(rng):
    c = centers2d(rng)
    f = lambda m: np.column_stack([1.0 + 2.0 * m[:, 0] - 3.0 * m[:, 1], -0.5 * m[:, 0]])
    r = rbf_fit(c, f(c))
    x = rng.uniform([0.5, 0.25], [1.5, 0.35], (50, 2))
    np.testing.assert_allclose(rbf_eval(r, x), f(x), rtol=1e-9, atol=1e-9)


def test_center_exactness_and_residual(rng):
    c = centers2d(rng, 60)
    T = np.column_stack([np.sin(3 * c[:, 0]) * c[:, 1], np.exp(c[:, 0])])
    r = rbf_fit(c, T)
    np.testing.assert_allclose(rbf_eval(r, c), T, rtol=1e-9)
    assert r.residual <= 1e-10


def test_saddle_residual_recomputed(rng):
    # independent residual of the saddle system in the frame the fit used
    c = rng.uniform(0.0, 1.0, (30, 1))
    T = np.cos(5 * c)
    r = rbf_fit(c, T)
    A = saddle_matrix((c - r.shift) / r.scale)
    x = np.concatenate([r.weights, r.poly_coeffs])
    b = np.concatenate([T, np.zeros((2, 1))])
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_frame_invariance(rng):
    # the shift/scale frame does not change the interpolant: compare against a direct
    # solve of the unscaled saddle system
    c = rng.uniform(0.5, 1.5, (15, 1))
    T = np.sin(3 * c)
    A = saddle_matrix(c)
    x = np.linalg.solve(A, np.concatenate([T, np.zeros((2, 1))]))
    mu = rng.uniform(0.5, 1.5, (25, 1))
    d = np.abs(mu - c.T)
    direct = d**3 @ x[:15] + x[15] + mu * x[16]
    np.testing.assert_allclose(rbf_eval(rbf_fit(c, T), mu), direct, rtol=1e-8, atol=1e-10)


def test_gradient_finite_differences(rng):
    c = centers2d(rng)
    r = rbf_fit(c, np.column_stack([np.sin(4 * c[:, 0]) + c[:, 1] ** 2, c[:, 0] * c[:, 1]]))
    h = 1e-6
    for mu in rng.uniform([0.6, 0.26], [1.4, 0.34], (10, 2)):
        G = rbf_gradient(r, mu)
        fd = np.column_stack([(rbf_eval(r, mu + h * e) - rbf_eval(r, mu - h * e)) / (2 * h) for e in np.eye(2)])
        np.testing.assert_allclose(G, fd, rtol=1e-5, atol=1e-5 * np.abs(G).max())


def test_too_few_centers():
    with pytest.raises(ConfigError):
        rbf_fit(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.ones(3))


def test_coincident_centers():
    with pytest.raises(NumericError):
        rbf_fit(np.array([[0.0], [0.0], [1.0], [2.0]]), np.arange(4.0))


def test_collinear_2d_centers_singular():
    c = np.column_stack([np.linspace(0, 1, 6), np.linspace(0, 1, 6)])
    with pytest.raises(NumericError):
        rbf_fit(c, np.arange(6.0))


def test_condition_warning(caplog):
    g = np.linspace(0, 1, 20)
    c = np.concatenate([g, [g[10] + 1e-6]])[:, None]
    with caplog.at_level(logging.WARNING, logger="lrom.rbf"):
        r = rbf_fit(c, np.sin(c))
    assert r.condition > 1e12
    assert any("condition" in m for m in caplog.messages)


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 40), st.integers(0, 2**31))
def test_exact_at_centers_property(n, seed):
    # quasi-uniform designs: one center per cell of a uniform grid, jittered inside it
    g = np.random.default_rng(seed)
    c = ((np.arange(n) + 0.5 + g.uniform(-0.3, 0.3, n)) / n)[:, None]
    T = g.standard_normal((n, 3))
    r = rbf_fit(c, T)
    assert r.residual <= 1e-10
    np.testing.assert_allclose(rbf_eval(r, c), T, rtol=1e-9, atol=1e-9 * np.abs(T).max())
