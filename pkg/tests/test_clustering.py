import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrom.clustering import elbow_scan, kmeans, nearest_centroid, variance
from lrom.errors import ConfigError
from oracles import reassignment_optimal


def test_k1_mean(rng):
    P = rng.standard_normal((50, 2))
    m = kmeans(P, 1)
    np.testing.assert_allclose(m.centroids[0], P.mean(axis=0), rtol=0, atol=1e-14)


def test_two_blobs_brute_force(rng):
    a = rng.normal([0, 0], 0.1, (6, 2))
    b = rng.normal([10, 0], 0.1, (6, 2))
    P = np.vstack([a, b])
    # oracle: best of all 2-partitions of the 12 points
    best = (np.inf, None)
    for mask in itertools.product([0, 1], repeat=11):
        lab = np.array((0,) + mask)
        if lab.all() or not lab.any():
            continue
        cen = np.stack([P[lab == j].mean(axis=0) for j in (0, 1)])
        v = np.sum((P - cen[lab]) ** 2)
        if v < best[0]:
            best = (v, cen)
    m = kmeans(P, 2, seed=3)
    assert m.variance == pytest.approx(best[0], rel=1e-12)
    got = m.centroids[np.argsort(m.centroids[:, 0])]
    want = best[1][np.argsort(best[1][:, 0])]
    np.testing.assert_allclose(got, want, atol=1e-12)
    assert np.all(np.abs(got - np.array([a.mean(0), b.mean(0)])).max() <= 0.2)


def test_k_equals_n(rng):
    P = rng.standard_normal((9, 2))
    assert kmeans(P, 9).variance == 0.0


def test_duplicate_point_zero_variance():
    assert kmeans(np.array([[0.3, 0.4]] * 5), 1).variance == 0.0


def test_three_point_hand_value():
    # centroid (1, 1); squared distances 2 + 0 + 2... for (0,0), (1,1), (2,2): 2 + 0 + 2 = 4
    assert kmeans(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]), 1).variance == pytest.approx(4.0, rel=1e-15)


def test_square_k2():
    s = 2.0
    P = np.array([[0, 0], [s, 0], [0, s], [s, s]], dtype=float)
    # enumerate all 2-partitions by hand: the two side-pairings give 2 clusters * 2 points * (s/2)^2
    want = 2 * (s / 2) ** 2 * 2
    assert kmeans(P, 2, seed=1).variance == pytest.approx(want, rel=1e-14)
    assert elbow_scan(P, [2])[0][1] == pytest.approx(want, rel=1e-14)


def test_invalid_k(rng):
    with pytest.raises(ConfigError):
        kmeans(rng.random((3, 1)), 4)
    with pytest.raises(ConfigError):
        kmeans(rng.random((3, 1)), 0)


def test_deterministic(rng):
    P = rng.random((200, 2))
    a, b = kmeans(P, 7, seed=5), kmeans(P, 7, seed=5)
    assert a.centroids.tobytes() == b.centroids.tobytes()
    np.testing.assert_array_equal(a.assignment, b.assignment)


def test_fields_consistent(rng):
    m = kmeans(rng.random((120, 2)), 6, seed=2)
    assert m.variance == pytest.approx(variance(m), rel=1e-12)
    assert np.all(m.sizes() > 0)
    d = np.sum((m.points[:, None] - m.centroids[None]) ** 2, axis=2)
    assert np.all(d[np.arange(len(d)), m.assignment] <= d.min(axis=1) + 1e-15)


def test_lloyd_history_monotone(rng):
    m = kmeans(rng.random((300, 2)), 10, seed=4, restarts=1)
    h = np.array(m.history)
    assert len(h) >= 1 and np.all(np.diff(h) <= 1e-12 * h[:-1])


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 200), st.integers(1, 8), st.integers(0, 2**31), st.integers(1, 2))
def test_assignment_optimality(n, k, seed, dim):
    k = min(k, n)
    P = np.random.default_rng(seed).random((n, dim))
    m = kmeans(P, k, seed=seed % 1000)
    h = np.array(m.history)
    assert np.all(np.diff(h) <= 1e-12 * h[:-1] + 1e-300)
    assert reassignment_optimal(m)


def test_nearest_centroid_examples():
    C = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 3.0]])
    assert nearest_centroid(C, [2.0, 0.0]) == 1
    assert nearest_centroid(C, [1.0, 0.0]) == 0  # equidistant to 0 and 1
    assert nearest_centroid(C[::-1], [1.0, 0.0]) == 1


def test_nearest_centroid_linear_scan(rng):
    C = rng.random((16, 2))
    for mu in rng.random((1000, 2)):
        best, bd = 0, np.inf
        for i, c in enumerate(C):
            d = (mu[0] - c[0]) ** 2 + (mu[1] - c[1]) ** 2
            if d < bd:
                best, bd = i, d
        assert nearest_centroid(C, mu) == best


def test_elbow_monotone_and_final_zero(rng):
    P = rng.random((40, 2))
    table = elbow_scan(P, [1, 2, 3, 5, 8, 13, 40])
    v = [t[1] for t in table]
    assert all(b <= a + 1e-12 for a, b in zip(v, v[1:]))
    assert v[-1] == 0.0
    with pytest.raises(ConfigError):
        elbow_scan(P, [3, 2])
