"""Proper orthogonal decomposition with energy-based truncation."""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .errors import ConfigError, EmptyBasisError, NumericError

# eigen/singular values below this fraction of the largest are treated as zero
RANK_RTOL = 1e-13


@dataclass(frozen=True, eq=False)
class SnapshotMatrix:
    data: np.ndarray  # (m, n)
    columns: tuple = None  # parameter index of each column

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[1] == 0:
            raise ConfigError(f"snapshot matrix must be 2-D and nonempty, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise NumericError("snapshot matrix contains non-finite entries")
        object.__setattr__(self, "data", data)
        cols = tuple(range(data.shape[1])) if self.columns is None else tuple(int(c) for c in self.columns)
        if len(cols) != data.shape[1]:
            raise ConfigError("column map length differs from snapshot count")
        object.__setattr__(self, "columns", cols)

    @classmethod
    def from_columns(cls, cols, index=None):
        return cls(np.column_stack(list(cols)), index)

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True, eq=False)
class PodBasis:
    modes: np.ndarray  # (m, P)
    singular_values: np.ndarray  # full spectrum, descending (modes stop at the numerical rank)
    energy_tolerance: float = None
    weight_id: str = None
    weight: object = field(default=None, repr=False)

    @property
    def retained_count(self):
        return self.modes.shape[1]

    @property
    def dim(self):
        return self.modes.shape[0]

    def project(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.dim:
            raise ConfigError(f"vector length {x.shape[0]} does not match basis dimension {self.dim}")
        if self.weight is not None:
            x = self.weight @ x
        return self.modes.T @ x

    def lift(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[0] != self.retained_count:
            raise ConfigError(f"expected {self.retained_count} coefficients, got {coeffs.shape[0]}")
        return self.modes @ coeffs


def truncation_rank(sigma, eps):
    """Smallest P with 1 - sum_{i<=P} s_i^2 / sum_i s_i^2 <= eps."""
    s2 = np.asarray(sigma, dtype=float) ** 2
    if len(s2) == 0:
        return 0
    total = s2.sum()
    # tail sums avoid cancellation in 1 - captured/total
    tail = np.concatenate([np.cumsum(s2[::-1])[::-1][1:], [0.0]]) / total
    return int(np.argmax(tail <= eps) + 1)


def _fix_signs(modes):
    idx = np.argmax(np.abs(modes), axis=0)
    signs = np.sign(modes[idx, np.arange(modes.shape[1])])
    signs[signs == 0] = 1.0
    return modes * signs


def _gram_route(S):
    C = S.T @ S
    lam, psi = la.eigh(C)
    order = np.argsort(lam)[::-1]
    lam, psi = lam[order], psi[:, order]
    if lam[0] <= 0.0:
        return np.zeros((S.shape[0], 0)), np.zeros(0)
    r = int(np.sum(lam > RANK_RTOL * lam[0]))
    sigma = np.sqrt(lam[:r])
    modes = (S @ psi[:, :r]) / sigma
    return modes, sigma


def _svd_route(S):
    U, s, _ = la.svd(S, full_matrices=False)
    if s[0] <= 0.0:
        return np.zeros((S.shape[0], 0)), np.zeros(0)
    r = int(np.sum(s**2 > RANK_RTOL * s[0] ** 2))
    return U[:, :r], s


def _refine(S, modes):
    """Rayleigh-Ritz step on the span of the Gram-route modes: re-orthonormalize and take the
    SVD of S projected onto that span. The eigenvalues of S^T S only resolve small singular
    values to an absolute error of about eps * s_1^2 / s_i; this step restores SVD accuracy.

    The singular values of the residual S - Q Q^T S complete the spectrum below the numerical
    rank, so the tail energies sum to the projection error exactly."""
    Q, _ = la.qr(modes, mode="economic")
    B = Q.T @ S
    Ub, sb, _ = la.svd(B, full_matrices=False)
    rest = la.svdvals(S - Q @ B)[: max(min(S.shape) - len(sb), 0)]
    return Q @ Ub, np.concatenate([sb, rest])


def pod(S, eps=None, n_modes=None, weight=None, weight_id=None, route="auto"):
    """POD basis of a snapshot matrix.

    Parameters
    ----------
    S : SnapshotMatrix or ndarray (m, n)
    eps : float, optional
        Energy tolerance in [0, 1); the smallest P with relative tail energy <= eps is kept.
    n_modes : int, optional
        Explicit basis size (capped at the numerical rank). Exactly one of eps/n_modes.
    weight : sparse or dense SPD matrix, optional
        Norm matrix X; modes are then X-orthonormal.
    route : {"auto", "gram", "svd"}
        "auto" uses the correlation-matrix eigenproblem when n <= m, a thin SVD otherwise.
    """
    data = S.data if isinstance(S, SnapshotMatrix) else np.asarray(S, dtype=float)
    if (eps is None) == (n_modes is None):
        raise ConfigError("give exactly one of eps or n_modes")
    if eps is not None and not 0.0 <= eps < 1.0:
        raise ConfigError(f"energy tolerance must lie in [0, 1), got {eps}")
    m, n = data.shape

    L = None
    if weight is not None:
        W = weight.toarray() if sp.issparse(weight) else np.asarray(weight, dtype=float)
        if W.shape != (m, m) or not np.allclose(W, W.T, rtol=1e-12, atol=1e-14 * np.abs(W).max()):
            raise NumericError("weight matrix must be square symmetric")
        try:
            L = la.cholesky(W, lower=True)
        except la.LinAlgError as exc:
            raise NumericError("weight matrix is not positive definite") from exc
        data = L.T @ data

    if route == "auto":
        route = "gram" if n <= m else "svd"
    if route == "gram":
        modes, sigma = _gram_route(data)
        if len(sigma):
            modes, sigma = _refine(data, modes)
    elif route == "svd":
        modes, sigma = _svd_route(data)
    else:
        raise ConfigError(f"unknown POD route {route!r}")
    if len(sigma) == 0:
        raise EmptyBasisError("snapshot matrix has rank zero")

    # modes exist only up to the numerical rank; sigma holds the full spectrum for the energy count
    rank = modes.shape[1]
    P = min(truncation_rank(sigma, eps) if eps is not None else int(n_modes), rank)
    modes = _fix_signs(modes[:, :P])
    if L is not None:
        modes = la.solve_triangular(L.T, modes, lower=False)
    return PodBasis(np.ascontiguousarray(modes), sigma, eps, weight_id, weight)


def projection_residual_energy(S, basis):
    data = S.data if isinstance(S, SnapshotMatrix) else np.asarray(S)
    R = data - basis.modes @ basis.project(data)
    return float(np.sum(R * R))


def principal_angles(A, B):
    return la.subspace_angles(A, B)
