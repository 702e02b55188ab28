"""Localized offline training (DEIM and RB), online reduced solves and error evaluation."""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.linalg import lapack

from .clustering import kmeans, nearest_centroid
from .deim import build_deim, operator_error
from .errors import ConfigError, NumericError, TrainingError
from .extension import SparsityPattern, union_pattern
from .fom import (Elasticity, FomRunner, MaterialParams, Poisson, build_mesh, error_norms, solve_fom,
                  solve_sparse)
from .geometry import GeometrySpec
from .pod import pod
from .rbf import rbf_eval, rbf_fit
from .sampling import generate

log = logging.getLogger(__name__)

COND_WARN = 1e12
TIMING_SCOPE = {
    "fom": "assembly + sparse direct solve",
    "rom": "cluster selection + theta evaluation + reduced assembly + dense LU solve + reconstruction",
}


def problem_from_dict(d):
    kind = d.get("kind", "poisson")
    dirichlet = tuple(d.get("dirichlet", ["left"]))
    if kind == "poisson":
        return Poisson(source=d.get("source", 1.0), dirichlet=dirichlet)
    if kind == "elasticity":
        mat = MaterialParams(float(d.get("young_E", 1.0)), float(d.get("poisson_nu", 0.3)))
        return Elasticity(body_force=tuple(d.get("body_force", (0.0, -1.0))), material=mat, dirichlet=dirichlet)
    raise ConfigError(f"unknown problem kind {kind!r}")


def problem_to_dict(p):
    if isinstance(p, Poisson):
        return {"kind": "poisson", "source": p.source, "dirichlet": list(p.dirichlet)}
    return {"kind": "elasticity", "young_E": p.material.young_E, "poisson_nu": p.material.poisson_nu,
            "body_force": list(p.body_force), "dirichlet": list(p.dirichlet)}


@dataclass(frozen=True)
class RomConfig:
    problem: object
    geometry: GeometrySpec
    nx: int = 32
    ny: int = 32
    depth: int = 6
    eps_pod: float = 1e-5
    eps_pod_d: float = 1e-7
    n_clusters: int = 1
    n_clusters_deim: int = 1
    n_train: int = 250
    n_train_deim: int = 500
    seed_rb: int = 2
    seed_deim: int = 1
    seed_cluster: int = 0
    sampling_rb: str = "latin_hypercube"
    sampling_deim: str = "latin_hypercube"
    error_norm: str = "l2"
    exact_snapshots: bool = False
    threads: int = 1

    def __post_init__(self):
        for name in ("nx", "ny", "depth", "n_clusters", "n_clusters_deim", "n_train", "n_train_deim", "threads"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        for name in ("eps_pod", "eps_pod_d"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1), got {v}")
        if self.error_norm not in ("l2", "h1"):
            raise ConfigError(f"error_norm must be 'l2' or 'h1', got {self.error_norm!r}")
        if self.eps_pod_d > self.eps_pod:
            log.warning("eps_pod_d=%g is looser than eps_pod=%g; DEIM should be the more accurate level",
                        self.eps_pod_d, self.eps_pod)

    def global_variant(self):
        return replace(self, n_clusters=1, n_clusters_deim=1)

    def to_dict(self):
        return {
            "problem": problem_to_dict(self.problem),
            "geometry": self.geometry.to_dict(),
            "mesh": {"nx": self.nx, "ny": self.ny, "quadrature_depth": self.depth},
            "tolerances": {"eps_pod": self.eps_pod, "eps_pod_d": self.eps_pod_d},
            "clustering": {"n_clusters": self.n_clusters, "n_clusters_deim": self.n_clusters_deim,
                           "seed": self.seed_cluster},
            "sampling": {"n_train_rb": self.n_train, "n_train_deim": self.n_train_deim,
                         "seed_rb": self.seed_rb, "seed_deim": self.seed_deim,
                         "kind_rb": self.sampling_rb, "kind_deim": self.sampling_deim},
            "rom": {"error_norm": self.error_norm, "exact_snapshots": self.exact_snapshots},
        }

    @classmethod
    def from_dict(cls, d, threads=1):
        mesh, tol, cl = d["mesh"], d["tolerances"], d["clustering"]
        smp, rom = d["sampling"], d.get("rom", {})
        return cls(
            problem=problem_from_dict(d["problem"]),
            geometry=GeometrySpec.from_dict(d["geometry"]),
            nx=int(mesh["nx"]), ny=int(mesh["ny"]), depth=int(mesh.get("quadrature_depth", 6)),
            eps_pod=float(tol["eps_pod"]), eps_pod_d=float(tol["eps_pod_d"]),
            n_clusters=int(cl["n_clusters"]), n_clusters_deim=int(cl["n_clusters_deim"]),
            seed_cluster=int(cl.get("seed", 0)),
            n_train=int(smp["n_train_rb"]), n_train_deim=int(smp["n_train_deim"]),
            seed_rb=int(smp.get("seed_rb", 2)), seed_deim=int(smp.get("seed_deim", 1)),
            sampling_rb=smp.get("kind_rb", "latin_hypercube"),
            sampling_deim=smp.get("kind_deim", "latin_hypercube"),
            error_norm=rom.get("error_norm", "l2"), exact_snapshots=bool(rom.get("exact_snapshots", False)),
            threads=int(threads),
        )

    def runner(self):
        return FomRunner(self.problem, self.geometry, build_mesh(self.geometry.box, self.nx, self.ny), self.depth)


@dataclass(frozen=True, eq=False)
class LocalDeim:
    """DEIM models and coefficient surrogates of one DEIM cluster."""

    A: object  # DeimModel, matrix kind
    f: object  # DeimModel, vector kind
    rbf_a: object
    rbf_f: object
    centroid: np.ndarray
    members: np.ndarray


@dataclass(frozen=True, eq=False)
class LocalDeimArtifact:
    clusters: tuple
    centroids: np.ndarray
    training: object  # SampleSet
    assignment: np.ndarray
    domain: object

    @property
    def n_clusters(self):
        return len(self.clusters)

    def select(self, mu):
        return nearest_centroid(self.centroids, mu)

    def q_sizes(self):
        return [(c.A.Q, c.f.Q) for c in self.clusters]

    def pattern(self):
        return union_pattern([c.A.pattern for c in self.clusters])

    def operators(self, mu, cluster=None):
        """DEIM-reconstructed (matrix, rhs) at ``mu``; the cluster defaults to the nearest one."""
        l = self.select(mu) if cluster is None else cluster
        c = self.clusters[l]
        return c.A.reconstruct(rbf_eval(c.rbf_a, mu)), c.f.reconstruct(rbf_eval(c.rbf_f, mu))


@dataclass(frozen=True, eq=False)
class LocalRomStore:
    bases: tuple  # PodBasis per RB cluster
    centroids: np.ndarray
    blocks: dict  # (k, l) -> (A blocks (Q_a, N, N), f blocks (Q_f, N))
    training: object
    assignment: np.ndarray
    domain: object

    @property
    def n_clusters(self):
        return len(self.bases)

    def select(self, mu):
        return nearest_centroid(self.centroids, mu)

    def n_sizes(self):
        return [b.retained_count for b in self.bases]


@dataclass(frozen=True, eq=False)
class RomSolution:
    u_N: np.ndarray
    u_hat: np.ndarray
    clusters: tuple  # (l, m): DEIM cluster, RB cluster
    timings: dict
    condition: float
    warning: str = None


@dataclass(frozen=True, eq=False)
class RomModel:
    config: RomConfig
    deim: LocalDeimArtifact
    store: LocalRomStore
    runner: FomRunner = field(repr=False, default=None)

    def solve(self, mu):
        return online_solve(self.store, self.deim, mu)


def _map(fn, items, threads):
    # results are gathered in input order
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def fom_operator_snapshots(runner, points, threads=1):
    """Extended matrix data (n, nnz) in background layout and extended load vectors (n, m)."""
    systems = _map(runner.assemble, list(points), threads)
    A = np.stack([s.data for s in systems])
    F = np.stack([s.rhs for s in systems])
    return A, F


def _cluster_patterns(space, A_members):
    keep = np.any(A_members != 0.0, axis=0)
    keep[space.diag_pos] = True
    pos = np.flatnonzero(keep)
    pat = SparsityPattern(space.total_dofs, space.pattern.rows[pos], space.pattern.cols[pos])
    return pat, pos


def _check_cluster_sizes(model, M, what, n_name, c_name):
    sizes = model.sizes()
    if sizes.min() < M + 2:
        raise TrainingError(
            f"{what} cluster {int(np.argmin(sizes))} has {int(sizes.min())} members, fewer than {M + 2}; "
            f"increase {n_name} or decrease {c_name}")


def offline_deim(config, runner=None, snapshots=None):
    """Localized DEIM: sample, cluster, per-cluster matrix/vector DEIM and RBF coefficient fits."""
    runner = runner or config.runner()
    space = runner.space
    dom = config.geometry.domain
    train = generate(config.sampling_deim, config.n_train_deim, dom, config.seed_deim)
    if snapshots is None:
        snapshots = fom_operator_snapshots(runner, train.points, config.threads)
    A_all, F_all = snapshots
    cm = kmeans(train.points, config.n_clusters_deim, seed=config.seed_cluster)
    _check_cluster_sizes(cm, dom.dim, "DEIM", "n_train_deim", "n_clusters_deim")
    clusters = []
    for k in range(cm.k):
        idx = cm.members(k)
        mus = train.points[idx]
        pat, pos = _cluster_patterns(space, A_all[idx])
        S_a = np.ascontiguousarray(A_all[idx][:, pos].T)
        S_f = np.ascontiguousarray(F_all[idx].T)
        dA = build_deim(S_a, config.eps_pod_d, "matrix", pat, space, pos)
        df = build_deim(S_f, config.eps_pod_d, "vector")
        th_a = la.lu_solve(dA._lu, S_a[dA.magic, :])  # (Q_a, n_k)
        th_f = la.lu_solve(df._lu, S_f[df.magic, :])
        clusters.append(LocalDeim(dA, df, rbf_fit(mus, th_a.T), rbf_fit(mus, th_f.T), cm.centroids[k], idx))
    return LocalDeimArtifact(tuple(clusters), cm.centroids, train, cm.assignment, dom)


def _project_matrix_terms(model, V):
    """V^T A_q V for every affine term of a matrix DEIM model, shape (Q, N, N)."""
    rows, cols = model.pattern.rows, model.pattern.cols
    n = model.pattern.n
    indptr = np.searchsorted(rows, np.arange(n + 1))
    out = np.empty((model.Q, V.shape[1], V.shape[1]))
    for q in range(model.Q):
        Aq = sp.csr_matrix((model.basis[:, q], cols, indptr), shape=(n, n))
        out[q] = V.T @ (Aq @ V)
    return out


def project_pair(basis, local_deim):
    V = basis.modes
    return _project_matrix_terms(local_deim.A, V), np.ascontiguousarray((V.T @ local_deim.f.basis).T)


def rb_snapshots(config, deim, runner, points):
    """Extended solutions at ``points``: solved from DEIM operators, or exact ones if configured."""
    def one(mu):
        if config.exact_snapshots:
            return solve_fom(runner.assemble(mu))
        A, f = deim.operators(mu)
        return solve_sparse(A, f)

    return np.column_stack(_map(one, list(points), config.threads))


def offline_rb(config, deim, runner=None, snapshots=None):
    """Localized RB: sample, cluster, per-cluster POD and projection of all DEIM clusters' terms."""
    runner = runner or config.runner()
    dom = config.geometry.domain
    train = generate(config.sampling_rb, config.n_train, dom, config.seed_rb)
    S = rb_snapshots(config, deim, runner, train.points) if snapshots is None else snapshots
    cm = kmeans(train.points, config.n_clusters, seed=config.seed_cluster)
    _check_cluster_sizes(cm, dom.dim, "RB", "n_train_rb", "n_clusters")
    weight, weight_id = None, None
    if config.error_norm == "h1":
        weight = runner.assemble(dom.midpoint).norm_matrix
        weight_id = "h1@midpoint"
    bases = []
    for k in range(cm.k):
        bases.append(pod(S[:, cm.members(k)], eps=config.eps_pod, weight=weight, weight_id=weight_id))
    blocks = {}
    for k, b in enumerate(bases):
        for l, c in enumerate(deim.clusters):
            blocks[(k, l)] = project_pair(b, c)
    return LocalRomStore(tuple(bases), cm.centroids, blocks, train, cm.assignment, dom)


def train(config, runner=None, snapshots=None):
    runner = runner or config.runner()
    deim = offline_deim(config, runner, snapshots)
    store = offline_rb(config, deim, runner)
    return RomModel(config, deim, store, runner)


def train_with_global(config, runner=None):
    """Local model plus the single-cluster baseline at the same tolerances; the DEIM operator
    snapshots are assembled once and shared."""
    runner = runner or config.runner()
    train_d = generate(config.sampling_deim, config.n_train_deim, config.geometry.domain, config.seed_deim)
    snaps = fom_operator_snapshots(runner, train_d.points, config.threads)
    return train(config, runner, snaps), train(config.global_variant(), runner, snaps)


def reduced_system(store, deim, mu, l, m):
    c = deim.clusters[l]
    Ab, fb = store.blocks[(m, l)]
    th_a = rbf_eval(c.rbf_a, mu)
    th_f = rbf_eval(c.rbf_f, mu)
    return np.tensordot(th_a, Ab, axes=1), th_f @ fb


def online_solve(store, deim, mu):
    """Nearest-centroid cluster switch, affine reduced assembly, dense LU solve, reconstruction."""
    t0 = time.perf_counter()
    mu = store.domain.check(mu)
    l = deim.select(mu)
    m = store.select(mu)
    c = deim.clusters[l]
    th_a = rbf_eval(c.rbf_a, mu)
    th_f = rbf_eval(c.rbf_f, mu)
    t1 = time.perf_counter()
    Ab, fb = store.blocks[(m, l)]
    A_N = np.tensordot(th_a, Ab, axes=1)
    f_N = th_f @ fb
    t2 = time.perf_counter()
    lu, piv, info = lapack.dgetrf(A_N)
    if info > 0:
        raise NumericError(f"reduced matrix is exactly singular at mu={mu.tolist()}", condition=np.inf)
    u_N = lapack.dgetrs(lu, piv, f_N)[0]
    rcond = lapack.dgecon(lu, np.abs(A_N).sum(axis=0).max(), norm="1")[0]
    t3 = time.perf_counter()
    u_hat = store.bases[m].modes @ u_N
    t4 = time.perf_counter()
    cond = 1.0 / rcond if rcond > 0 else np.inf
    warning = None
    if cond > COND_WARN:
        warning = f"reduced matrix condition estimate {cond:.3e} exceeds {COND_WARN:.0e}; system may be singular"
        log.warning(warning)
    timings = {"theta": t1 - t0, "assembly": t2 - t1, "solve": t3 - t2, "reconstruction": t4 - t3,
               "total": t4 - t0}
    return RomSolution(u_N, u_hat, (l, m), timings, float(cond), warning)


def evaluate(model, test, runner=None):
    """Per test parameter: FOM and ROM solves, relative errors on free DOFs, DEIM errors, speedup."""
    runner = runner or model.runner or model.config.runner()
    rows = []
    for i, mu in enumerate(getattr(test, "points", test)):
        system, u_fom, t_fom = runner.solve(mu)
        sol = model.solve(mu)
        rel_l2, rel_h1 = error_norms(sol.u_hat, u_fom, system)
        l, m = sol.clusters
        c = model.deim.clusters[l]
        A_d = c.A.reconstruct_values(rbf_eval(c.rbf_a, mu))
        f_d = c.f.reconstruct_values(rbf_eval(c.rbf_f, mu))
        err_a = operator_error(None, system.data[c.A.pattern_positions], A_d)
        err_f = operator_error(None, system.rhs, f_d)
        # exact nonzeros the cluster's trained pattern cannot represent
        inside = np.zeros(len(system.data), dtype=bool)
        inside[c.A.pattern_positions] = True
        misses = int(np.count_nonzero((system.data != 0.0) & ~inside))
        rows.append({
            "index": i, "mu": [float(v) for v in mu], "deim_cluster": l, "rb_cluster": m,
            "rel_l2": rel_l2, "rel_h1": rel_h1, "deim_linf_a": err_a, "deim_linf_f": err_f, "pattern_misses": misses,
            "fom_time": t_fom, "rom_time": sol.timings["total"], "speedup": t_fom / sol.timings["total"],
            "condition": sol.condition, "N": model.store.bases[m].retained_count, "Q_a": c.A.Q, "Q_f": c.f.Q,
        })
    return EvaluationReport(rows, model_summary(model))


def model_summary(model):
    qa = [q[0] for q in model.deim.q_sizes()]
    qf = [q[1] for q in model.deim.q_sizes()]
    ns = model.store.n_sizes()
    return {"n_clusters": model.store.n_clusters, "n_clusters_deim": model.deim.n_clusters,
            "max_Q_a": max(qa), "min_Q_a": min(qa), "max_Q_f": max(qf), "min_Q_f": min(qf),
            "max_N": max(ns), "min_N": min(ns)}


@dataclass
class EvaluationReport:
    rows: list
    summary: dict
    timing_scope: dict = field(default_factory=lambda: dict(TIMING_SCOPE))

    def column(self, name):
        return np.array([r[name] for r in self.rows], dtype=float)

    def aggregates(self):
        out = dict(self.summary)
        for name in ("rel_l2", "rel_h1", "deim_linf_a", "deim_linf_f", "speedup"):
            v = self.column(name)
            out[f"mean_{name}"] = float(v.mean())
            out[f"max_{name}"] = float(v.max())
        out["median_fom_time"] = float(np.median(self.column("fom_time")))
        out["median_rom_time"] = float(np.median(self.column("rom_time")))
        return out
