"""k-means partitioning of parameter samples and nearest-centroid selection."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

MAX_ITER = 300
RESTARTS = 5


@dataclass(frozen=True, eq=False)
class ClusterModel:
    centroids: np.ndarray  # (k, M)
    assignment: np.ndarray  # (n,)
    points: np.ndarray  # (n, M)
    variance: float
    iterations: int
    seed: int
    history: tuple = ()  # variance after every Lloyd iteration of the kept run

    @property
    def k(self):
        return len(self.centroids)

    def members(self, c):
        return np.flatnonzero(self.assignment == c)

    def sizes(self):
        return np.bincount(self.assignment, minlength=self.k)


def _sqdist(points, centroids):
    return np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)


def _variance(points, centroids, assignment):
    d = points - centroids[assignment]
    return float(np.sum(d * d))


def variance(model):
    return _variance(model.points, model.centroids, model.assignment)


def nearest_centroid(centroids, mu):
    centroids = np.atleast_2d(np.asarray(centroids, dtype=float))
    if len(centroids) == 0:
        raise ConfigError("no centroids")
    d = np.sum((centroids - np.asarray(mu, dtype=float)[None, :]) ** 2, axis=1)
    return int(np.argmin(d))  # first minimum = lowest index


def _plusplus(points, k, rng):
    n = len(points)
    idx = [int(rng.integers(n))]
    d2 = np.sum((points - points[idx[0]]) ** 2, axis=1)
    for _ in range(1, k):
        tot = d2.sum()
        if tot <= 0.0:
            # all remaining points coincide with chosen centers
            cand = np.setdiff1d(np.arange(n), idx)
            nxt = int(cand[rng.integers(len(cand))])
        else:
            nxt = int(np.searchsorted(np.cumsum(d2), rng.random() * tot, side="right"))
            nxt = min(nxt, n - 1)
        idx.append(nxt)
        d2 = np.minimum(d2, np.sum((points - points[nxt]) ** 2, axis=1))
    return points[idx].copy()


def _repair_empty(points, centroids, assign):
    k = len(centroids)
    for _ in range(k):
        sizes = np.bincount(assign, minlength=k)
        empty = np.flatnonzero(sizes == 0)
        if not len(empty):
            break
        big = int(np.argmax(sizes))
        members = np.flatnonzero(assign == big)
        far = members[np.argmax(np.sum((points[members] - centroids[big]) ** 2, axis=1))]
        assign[far] = empty[0]
        centroids[empty[0]] = points[far]
        centroids[big] = points[assign == big].mean(axis=0)
    return centroids, assign


def _single_moves(points, centroids, assign):
    """Hartigan refinement: move single points while that lowers the variance with the two
    affected means recomputed. Lloyd's fixed point only guarantees optimality for fixed means."""
    k = len(centroids)
    sizes = np.bincount(assign, minlength=k).astype(float)
    moved = False
    for _ in range(len(points)):
        changed = False
        for i, x in enumerate(points):
            a = assign[i]
            if sizes[a] <= 1:
                continue
            d = np.sum((centroids - x) ** 2, axis=1)
            cost = sizes / (sizes + 1.0) * d
            cost[a] = sizes[a] / (sizes[a] - 1.0) * d[a]
            b = int(np.argmin(cost))
            # strict decrease beyond round-off keeps the loop finite
            if b == a or cost[b] >= cost[a] * (1.0 - 1e-12):
                continue
            centroids[a] = (sizes[a] * centroids[a] - x) / (sizes[a] - 1.0)
            centroids[b] = (sizes[b] * centroids[b] + x) / (sizes[b] + 1.0)
            sizes[a] -= 1.0
            sizes[b] += 1.0
            assign[i] = b
            changed = moved = True
        if not changed:
            break
    return moved


def _lloyd(points, centroids, max_iter):
    history = []
    assign = np.argmin(_sqdist(points, centroids), axis=1)
    centroids, assign = _repair_empty(points, centroids, assign)
    it = 0
    for it in range(1, max_iter + 1):
        k = len(centroids)
        centroids = np.stack([points[assign == c].mean(axis=0) for c in range(k)])
        v = _variance(points, centroids, assign)
        if history and v > history[-1] * (1 + 1e-12) + 1e-300:
            raise AssertionError(f"k-means variance increased: {history[-1]} -> {v}")
        history.append(v)
        new = np.argmin(_sqdist(points, centroids), axis=1)
        # keep current label on exact ties so the loop terminates
        d = _sqdist(points, centroids)
        cur = d[np.arange(len(points)), assign]
        new = np.where(d[np.arange(len(points)), new] < cur, new, assign)
        new_centroids, new = _repair_empty(points, centroids.copy(), new)
        if np.array_equal(new, assign):
            # Lloyd converged; continue only if a single-point move still helps
            assign = assign.copy()
            if not _single_moves(points, centroids.copy(), assign):
                break
            continue
        assign = new
        centroids = new_centroids
    k = len(centroids)
    centroids = np.stack([points[assign == c].mean(axis=0) for c in range(k)])
    return centroids, assign, it, history


def kmeans(points, k, seed=0, restarts=RESTARTS, max_iter=MAX_ITER):
    """Lloyd iterations from k-means++ seeds; best of ``restarts`` runs by variance."""
    pts = np.asarray(getattr(points, "points", points), dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = len(pts)
    if not 1 <= k <= n:
        raise ConfigError(f"cluster count {k} must lie in [1, {n}]")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    best = None
    for _ in range(max(1, restarts)):
        c0 = _plusplus(pts, k, rng)
        centroids, assign, it, hist = _lloyd(pts, c0, max_iter)
        v = _variance(pts, centroids, assign)
        if best is None or v < best[0]:
            best = (v, centroids, assign, it, hist)
    v, centroids, assign, it, hist = best
    return ClusterModel(centroids, assign.astype(np.int64), pts, v, it, int(seed), tuple(hist))


def elbow_scan(points, k_list, seed=0, restarts=RESTARTS):
    """(k, variance) table; each variance is forced not to exceed the previous k's."""
    ks = [int(k) for k in k_list]
    if not ks or ks != sorted(ks):
        raise ConfigError("k_list must be nonempty and ascending")
    table = []
    prev = np.inf
    for k in ks:
        v = kmeans(points, k, seed=seed, restarts=restarts).variance
        # splitting a cluster of the previous solution can only lower the variance,
        # so a larger value here is restart noise
        v = min(v, prev)
        table.append((k, v))
        prev = v
    return table
