"""Zero extension between the active space and the background space, and sparsity patterns."""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError


@dataclass(frozen=True, eq=False)
class ActiveDofMap:
    """Which background DOFs are active (support meets the domain) and free (active, not Dirichlet)."""

    active: np.ndarray
    dirichlet: np.ndarray

    def __post_init__(self):
        active = np.asarray(self.active, dtype=bool)
        dirichlet = np.asarray(self.dirichlet, dtype=bool)
        if active.shape != dirichlet.shape or active.ndim != 1:
            raise ConfigError("active and dirichlet flags must be 1-D arrays of equal length")
        active.setflags(write=False)
        dirichlet.setflags(write=False)
        object.__setattr__(self, "active", active)
        object.__setattr__(self, "dirichlet", dirichlet)
        free = active & ~dirichlet
        free.setflags(write=False)
        object.__setattr__(self, "free", free)

    @classmethod
    def all_active(cls, n):
        return cls(np.ones(n, dtype=bool), np.zeros(n, dtype=bool))

    @property
    def total_dofs(self):
        return len(self.active)

    @property
    def active_count(self):
        return int(self.active.sum())

    @property
    def free_count(self):
        return int(self.free.sum())

    @property
    def active_indices(self):
        return np.flatnonzero(self.active)

    @property
    def free_indices(self):
        return np.flatnonzero(self.free)


def extend(values_on_active, dof_map):
    values = np.asarray(values_on_active)
    if values.shape[0] != dof_map.active_count:
        raise ConfigError(f"expected {dof_map.active_count} active values, got {values.shape[0]}")
    out = np.zeros((dof_map.total_dofs,) + values.shape[1:], dtype=values.dtype)
    out[dof_map.active] = values
    return out


def restrict(extended, dof_map):
    extended = np.asarray(extended)
    if extended.shape[0] != dof_map.total_dofs:
        raise ConfigError(f"expected length {dof_map.total_dofs}, got {extended.shape[0]}")
    return extended[dof_map.active]


@dataclass(frozen=True, eq=False)
class SparsityPattern:
    """Sorted, duplicate-free (row, col) pairs of a square matrix of order ``n``."""

    n: int
    rows: np.ndarray
    cols: np.ndarray
    _keys: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=np.int64)
        cols = np.ascontiguousarray(self.cols, dtype=np.int64)
        keys = rows * self.n + cols
        if len(keys) > 1 and np.any(np.diff(keys) <= 0):
            raise ConfigError("pattern pairs must be strictly sorted")
        for a in (rows, cols, keys):
            a.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "_keys", keys)

    @classmethod
    def from_keys(cls, n, keys):
        keys = np.unique(np.asarray(keys, dtype=np.int64))
        return cls(n, keys // n, keys % n)

    @classmethod
    def from_csr(cls, mat, include_diagonal=True):
        coo = mat.tocoo()
        keys = coo.row.astype(np.int64) * mat.shape[0] + coo.col
        if include_diagonal:
            d = np.arange(mat.shape[0], dtype=np.int64)
            keys = np.concatenate([keys, d * mat.shape[0] + d])
        return cls.from_keys(mat.shape[0], keys)

    def __len__(self):
        return len(self.rows)

    @property
    def keys(self):
        return self._keys

    def positions(self, rows, cols):
        """Flat positions of (row, col) pairs; -1 where a pair is absent."""
        k = np.asarray(rows, dtype=np.int64) * self.n + np.asarray(cols, dtype=np.int64)
        pos = np.searchsorted(self._keys, k)
        pos_c = np.minimum(pos, len(self._keys) - 1)
        return np.where((pos < len(self._keys)) & (self._keys[pos_c] == k), pos, -1)

    def position(self, row, col):
        return int(self.positions([row], [col])[0])

    def contains(self, other):
        return bool(np.all(np.isin(other.keys, self._keys, assume_unique=True)))

    def is_symmetric(self):
        return np.array_equal(np.sort(self.cols * self.n + self.rows), self._keys)

    def checksum(self):
        """64-bit FNV-1a over the sorted pairs, each as two little-endian int64."""
        return kernels.fnv1a64_pairs(self.rows, self.cols)


def union_pattern(patterns):
    patterns = list(patterns)
    if not patterns:
        raise ConfigError("union of zero patterns")
    n = patterns[0].n
    if any(p.n != n for p in patterns):
        raise ConfigError("patterns have different matrix orders")
    if len(patterns) == 1:
        return patterns[0]
    return SparsityPattern.from_keys(n, np.concatenate([p.keys for p in patterns]))
