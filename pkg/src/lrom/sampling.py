"""Deterministic training/test parameter sets."""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError

GENERATOR = "numpy.random.PCG64(SeedSequence(seed))"
_KINDS = ("latin_hypercube", "uniform_random", "tensor_grid")


@dataclass(frozen=True, eq=False)
class SampleSet:
    points: np.ndarray  # (n, M)
    seed: int
    kind: str

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def subset(self, idx):
        return SampleSet(self.points[np.asarray(idx)], self.seed, self.kind)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"mu{i + 1}" for i in range(self.points.shape[1])])
            for p in self.points:
                w.writerow([f"{v:.17g}" for v in p])

    @classmethod
    def from_csv(cls, path, seed=0, kind="uniform_random"):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        return cls(np.array([[float(v) for v in r] for r in rows[1:]], dtype=float), seed, kind)


def _rng(seed):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def _bounds(domain):
    return np.asarray(domain.lower, dtype=float), np.asarray(domain.upper, dtype=float)


def _dedupe(points, draw, tol=1e-12):
    # resample any point within tol (max-norm) of an earlier one
    for _ in range(100):
        pairs = cKDTree(points).query_pairs(tol, p=np.inf)
        if not pairs:
            return points
        for i in sorted({max(p) for p in pairs}):
            points[i] = draw(i)
    raise ConfigError("could not generate distinct samples")


def latin_hypercube(n, domain, seed):
    if n < 1:
        raise ConfigError("sample count must be >= 1")
    rng = _rng(seed)
    lo, hi = _bounds(domain)
    m = len(lo)
    u = np.empty((n, m))
    for j in range(m):
        u[:, j] = (rng.permutation(n) + rng.random(n)) / n
    pts = lo + u * (hi - lo)

    def redraw(i):
        # stay in the same bins
        bins = np.floor(u[i] * n)
        return lo + (bins + rng.random(m)) / n * (hi - lo)

    return SampleSet(_dedupe(pts, redraw), int(seed), "latin_hypercube")


def uniform_random(n, domain, seed):
    if n < 1:
        raise ConfigError("sample count must be >= 1")
    rng = _rng(seed)
    lo, hi = _bounds(domain)
    pts = lo + rng.random((n, len(lo))) * (hi - lo)
    return SampleSet(_dedupe(pts, lambda i: lo + rng.random(len(lo)) * (hi - lo)), int(seed), "uniform_random")


def tensor_grid(n_per_dim, domain, seed=0):
    lo, hi = _bounds(domain)
    axes = [np.linspace(a, b, int(n_per_dim)) for a, b in zip(lo, hi)]
    pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    return SampleSet(pts, int(seed), "tensor_grid")


def generate(kind, n, domain, seed):
    if kind == "latin_hypercube":
        return latin_hypercube(n, domain, seed)
    if kind == "uniform_random":
        return uniform_random(n, domain, seed)
    if kind == "tensor_grid":
        return tensor_grid(n, domain, seed)
    raise ConfigError(f"unknown sample kind {kind!r}; expected one of {_KINDS}")
