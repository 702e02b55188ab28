"""Cubic radial basis function interpolation with a linear polynomial tail."""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.spatial.distance import cdist

from .errors import ConfigError, NumericError

log = logging.getLogger(__name__)

KERNEL = "cubic"
COND_WARN = 1e12
RESIDUAL_TOL = 1e-10


def _phi(r):
    return r**3


def _tail(mu):
    return np.hstack([np.ones((mu.shape[0], 1)), mu])


@dataclass(frozen=True, eq=False)
class RbfInterpolant:
    centers: np.ndarray  # (n, M)
    weights: np.ndarray  # (n, Q)
    poly_coeffs: np.ndarray  # (M + 1, Q)
    condition: float = float("nan")
    residual: float = 0.0
    kernel: str = KERNEL
    shift: np.ndarray = None  # centers are fitted in the frame (mu - shift) / scale
    scale: float = 1.0

    def __post_init__(self):
        if self.shift is None:
            object.__setattr__(self, "shift", np.zeros(self.centers.shape[1]))

    @property
    def n_outputs(self):
        return self.weights.shape[1]

    def __call__(self, mu):
        return rbf_eval(self, mu)


def saddle_matrix(centers):
    n, M = centers.shape
    A = np.zeros((n + M + 1, n + M + 1))
    A[:n, :n] = _phi(cdist(centers, centers))
    P = _tail(centers)
    A[:n, n:] = P
    A[n:, :n] = P.T
    return A


def _frame(centers):
    # an isotropic affine change of variables leaves the cubic + linear interpolant
    # unchanged but balances r^3 against the unit tail entries
    shift = 0.5 * (centers.min(axis=0) + centers.max(axis=0))
    scale = float(np.max(np.abs(centers - shift)))
    return shift, (scale if scale > 0.0 else 1.0)


def rbf_fit(centers, targets):
    """Solve [[Phi, P], [P^T, 0]] [w; c] = [targets; 0] for all target columns at once.

    The system is assembled for the centers mapped into [-1, 1]^M by one common shift and scale.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    targets = np.asarray(targets, dtype=float)
    if targets.ndim == 1:
        targets = targets[:, None]
    n, M = centers.shape
    if targets.shape[0] != n:
        raise ConfigError(f"{n} centers but {targets.shape[0]} target rows")
    if n < M + 2:
        raise ConfigError(f"need at least {M + 2} centers for a {M}-D cubic RBF, got {n}")
    shift, scale = _frame(centers)
    A = saddle_matrix((centers - shift) / scale)
    b = np.zeros((n + M + 1, targets.shape[1]))
    b[:n] = targets
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > 1e16:
        raise NumericError(f"RBF system is singular (condition {cond:.3e}); centers coincide or are degenerate",
                           condition=cond)
    if cond > COND_WARN:
        log.warning("RBF system condition number %.3e exceeds %.0e", cond, COND_WARN)
    x = la.solve(A, b, assume_a="sym")
    nb = np.linalg.norm(b)
    res = float(np.linalg.norm(A @ x - b) / nb) if nb > 0 else 0.0
    if res > RESIDUAL_TOL:
        x += la.solve(A, b - A @ x, assume_a="sym")
        res = float(np.linalg.norm(A @ x - b) / nb)
        if res > RESIDUAL_TOL:
            log.warning("RBF residual %.3e above %.0e after refinement", res, RESIDUAL_TOL)
    return RbfInterpolant(centers, np.ascontiguousarray(x[:n]), np.ascontiguousarray(x[n:]), cond, res, KERNEL,
                          shift, scale)


def rbf_eval(interp, mu):
    """Evaluate at one parameter (returns (Q,)) or at many (shape (k, M) -> (k, Q))."""
    mu = np.asarray(mu, dtype=float)
    single = mu.ndim == 1
    mu = np.atleast_2d(mu)
    if mu.shape[1] != interp.centers.shape[1]:
        raise ConfigError(f"parameter dimension {mu.shape[1]} != {interp.centers.shape[1]}")
    z = (mu - interp.shift) / interp.scale
    zc = (interp.centers - interp.shift) / interp.scale
    d = np.sqrt(np.sum((z[:, None, :] - zc[None, :, :]) ** 2, axis=2))
    out = _phi(d) @ interp.weights + _tail(z) @ interp.poly_coeffs
    return out[0] if single else out


def rbf_gradient(interp, mu):
    """Analytic gradient d theta / d mu at one parameter, shape (Q, M)."""
    s = interp.scale
    z = (np.asarray(mu, dtype=float) - interp.shift) / s
    diff = z[None, :] - (interp.centers - interp.shift) / s  # (n, M)
    r = np.sqrt(np.sum(diff**2, axis=1))
    # d/dz r^3 = 3 r (z - c), and dz/dmu = 1/s
    g = 3.0 * r[:, None] * diff
    return (interp.weights.T @ g + interp.poly_coeffs[1:].T) / s
