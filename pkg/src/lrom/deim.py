"""Discrete empirical interpolation of vectors and (pattern-vectorized) matrices."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .errors import ConfigError, NumericError
from .pod import SnapshotMatrix, pod


def magic_indices(U):
    """Greedy residual-argmax interpolation indices; ties go to the lowest index."""
    m, Q = U.shape
    J = [int(np.argmax(np.abs(U[:, 0])))]
    for q in range(1, Q):
        c = la.solve(U[J, :q], U[J, q])
        res = U[:, q] - U[:, :q] @ c
        J.append(int(np.argmax(np.abs(res))))
    return np.array(J, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class DeimModel:
    kind: str  # "vector" or "matrix"
    basis: np.ndarray  # (p, Q)
    magic: np.ndarray  # (Q,)
    singular_values: np.ndarray
    pattern: object = None  # SparsityPattern, matrix kind only
    space: object = None  # FeSpace carrying the background CSR layout, matrix kind only
    pattern_positions: np.ndarray = None  # union-pattern entries inside the background layout

    def __post_init__(self):
        lu = la.lu_factor(self.basis[self.magic, :])
        object.__setattr__(self, "_lu", lu)

    @property
    def Q(self):
        return self.basis.shape[1]

    @property
    def interp_matrix(self):
        return self.basis[self.magic, :]

    @property
    def condition(self):
        return float(np.linalg.cond(self.interp_matrix))

    def theta_exact(self, probe):
        probe = np.asarray(probe, dtype=float)
        if probe.shape[0] != self.Q:
            raise ConfigError(f"probe needs {self.Q} entries, got {probe.shape[0]}")
        if np.any(np.abs(np.diag(self._lu[0])) == 0.0):
            raise NumericError("singular DEIM interpolation matrix")
        return la.lu_solve(self._lu, probe)

    def theta_from_snapshot(self, snapshot):
        """Exact coefficients of a (vectorized) operator: probe its magic entries."""
        return self.theta_exact(np.asarray(snapshot)[self.magic])

    def reconstruct_values(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape[0] != self.Q:
            raise ConfigError(f"theta needs {self.Q} entries, got {theta.shape[0]}")
        return self.basis @ theta

    def reconstruct(self, theta):
        """Vector, or CSR matrix in the background layout for matrix kind."""
        vals = self.reconstruct_values(theta)
        if self.kind == "vector":
            return vals
        return self.scatter(vals)

    def scatter(self, vals):
        data = np.zeros(self.space.nnz)
        data[self.pattern_positions] = vals
        return self.space.csr(data)

    def term(self, q):
        """q-th affine term (basis column), scattered for matrix kind."""
        e = np.zeros(self.Q)
        e[q] = 1.0
        return self.reconstruct(e)


def build_deim(S_op, eps_d, kind="vector", pattern=None, space=None, pattern_positions=None, n_terms=None):
    """POD of operator snapshots followed by greedy magic-point selection."""
    data = S_op.data if isinstance(S_op, SnapshotMatrix) else np.asarray(S_op, dtype=float)
    if not np.any(data):
        raise NumericError("operator snapshots are all zero; DEIM is degenerate")
    if kind == "matrix" and (space is None or pattern_positions is None):
        raise ConfigError("matrix DEIM needs the background space and pattern positions")
    basis = pod(data, eps=None if n_terms else eps_d, n_modes=n_terms)
    U = basis.modes
    J = magic_indices(U)
    return DeimModel(kind, U, J, basis.singular_values, pattern, space, pattern_positions)


def operator_error(model, exact_op, approx_op):
    """Relative max-norm error; matrices are compared on the model's union pattern."""
    if model is not None and model.kind == "matrix":
        ex = _pattern_values(exact_op, model)
        ap = _pattern_values(approx_op, model)
    else:
        ex = np.asarray(exact_op, dtype=float).ravel()
        ap = np.asarray(approx_op, dtype=float).ravel()
    den = np.max(np.abs(ex))
    if den == 0.0:
        raise NumericError("exact operator is zero; relative error undefined")
    return float(np.max(np.abs(ex - ap)) / den)


def _pattern_values(op, model):
    if sp.issparse(op):
        return np.asarray(op.tocsr().data)[model.pattern_positions]
    return np.asarray(op, dtype=float)
