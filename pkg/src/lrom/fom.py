"""Full order model: Q1 elements on a Cartesian background mesh, cut-cell quadrature,
assembly of the extended Poisson / linear elasticity systems and their solution.

Non-free DOFs (inactive or Dirichlet) are replaced by unit rows/columns so the
extended system has the fixed order of the background space for every parameter.
"""

import ast
import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .errors import ConfigError, DegenerateGeometryError, NumericError
from .extension import ActiveDofMap, SparsityPattern
from .geometry import ElementClass, classify_boxes, resolve_holes

GAUSS_1D = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
EDGES = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class BackgroundMesh:
    box: tuple
    nx: int
    ny: int

    @property
    def hx(self):
        return (self.box[2] - self.box[0]) / self.nx

    @property
    def hy(self):
        return (self.box[3] - self.box[1]) / self.ny

    @property
    def n_nodes(self):
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_elements(self):
        return self.nx * self.ny

    @cached_property
    def node_coords(self):
        x = np.linspace(self.box[0], self.box[2], self.nx + 1)
        y = np.linspace(self.box[1], self.box[3], self.ny + 1)
        X, Y = np.meshgrid(x, y)  # node n = j*(nx+1) + i
        return np.column_stack([X.ravel(), Y.ravel()])

    @cached_property
    def element_nodes(self):
        i, j = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        n0 = (j * (self.nx + 1) + i).ravel()
        return np.column_stack([n0, n0 + 1, n0 + self.nx + 2, n0 + self.nx + 1])

    @cached_property
    def element_boxes(self):
        lo = self.node_coords[self.element_nodes[:, 0]]
        hi = self.node_coords[self.element_nodes[:, 2]]
        return np.ascontiguousarray(np.column_stack([lo, hi]))

    def edge_nodes(self, edge):
        idx = np.arange(self.n_nodes)
        i, j = idx % (self.nx + 1), idx // (self.nx + 1)
        sel = {"left": i == 0, "right": i == self.nx, "bottom": j == 0, "top": j == self.ny}
        if edge not in sel:
            raise ConfigError(f"unknown edge {edge!r}; expected one of {EDGES}")
        return idx[sel[edge]]


def build_mesh(box, nx, ny):
    if int(nx) != nx or int(ny) != ny or nx < 2 or ny < 2:
        raise ConfigError(f"mesh needs at least 2 elements per direction, got {nx}x{ny}")
    box = tuple(float(v) for v in box)
    if box[0] >= box[2] or box[1] >= box[3]:
        raise ConfigError(f"degenerate box {box}")
    return BackgroundMesh(box, int(nx), int(ny))


class FeSpace:
    """Bilinear scalar or 2-vector space on a background mesh, plus its full sparsity
    pattern (every pair of DOFs sharing an element) in CSR layout."""

    def __init__(self, mesh, kind="scalar"):
        if kind not in ("scalar", "vector2"):
            raise ConfigError(f"unknown space kind {kind!r}")
        self.mesh = mesh
        self.kind = kind
        self.dofs_per_node = 1 if kind == "scalar" else 2
        self.total_dofs = mesh.n_nodes * self.dofs_per_node
        d = self.dofs_per_node
        en = mesh.element_nodes
        self.connectivity = (en[:, :, None] * d + np.arange(d)[None, None, :]).reshape(len(en), 4 * d)
        nl = self.connectivity.shape[1]
        r = np.repeat(self.connectivity, nl, axis=1).ravel()
        c = np.tile(self.connectivity, (1, nl)).ravel()
        keys = np.unique(r.astype(np.int64) * self.total_dofs + c)
        self.pattern = SparsityPattern.from_keys(self.total_dofs, keys)
        self.indices = self.pattern.cols.astype(np.int32)
        self.indptr = np.searchsorted(self.pattern.rows, np.arange(self.total_dofs + 1)).astype(np.int32)
        self.entry_rows = self.pattern.rows
        self.elem_pos = self.pattern.positions(r, c).reshape(len(en), nl, nl)
        self.diag_pos = self.pattern.positions(np.arange(self.total_dofs), np.arange(self.total_dofs))

    @property
    def nnz(self):
        return len(self.pattern)

    def dofs_of_nodes(self, nodes):
        nodes = np.asarray(nodes)
        return (nodes[:, None] * self.dofs_per_node + np.arange(self.dofs_per_node)).ravel()

    def csr(self, data):
        n = self.total_dofs
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(n, n))

    @cached_property
    def gauss_points(self):
        """Physical 2x2 Gauss points for every element, shape (ne, 4, 2)."""
        b = self.mesh.element_boxes
        gx = b[:, 0:1] + GAUSS_1D[None, [0, 1, 0, 1]] * self.mesh.hx
        gy = b[:, 1:2] + GAUSS_1D[None, [0, 0, 1, 1]] * self.mesh.hy
        return np.stack([gx, gy], axis=2)

    def reference_rule(self):
        """Quadrature data for the first element, valid for all (congruent) elements."""
        pts = np.ascontiguousarray(self.gauss_points[0])
        w = np.full(4, 0.25 * self.mesh.hx * self.mesh.hy)
        return pts, w


@dataclass(frozen=True)
class MaterialParams:
    young_E: float
    poisson_nu: float

    def __post_init__(self):
        if not self.young_E > 0:
            raise ConfigError("Young modulus must be positive")
        if not 0.0 < self.poisson_nu < 0.5:
            raise ConfigError("Poisson ratio must lie in (0, 0.5)")

    @property
    def lame_mu(self):
        return self.young_E / (2.0 * (1.0 + self.poisson_nu))

    @property
    def lame_lambda(self):
        nu = self.poisson_nu
        return self.young_E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))


_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt, "abs": np.abs}
_NAMES = {"pi": np.pi, "e": np.e}


def compile_field(expr):
    """Compile a number or an expression in ``x, y`` into a vectorized ``f(x, y)``.

    Only arithmetic, ``pi``, ``e`` and sin/cos/exp/sqrt/abs are accepted.
    """
    if callable(expr):
        return expr
    if isinstance(expr, (int, float)):
        c = float(expr)
        return lambda x, y: np.full(np.shape(x), c)
    try:
        tree = ast.parse(str(expr), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse field expression {expr!r}") from exc
    allowed = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Constant, ast.Name, ast.Load, ast.Call,
               ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)
    for node in ast.walk(tree):
        if not isinstance(node, allowed):
            raise ConfigError(f"disallowed construct {type(node).__name__} in {expr!r}")
        if isinstance(node, ast.Name) and node.id not in ("x", "y", *_FUNCS, *_NAMES):
            raise ConfigError(f"unknown name {node.id!r} in {expr!r}")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS):
            raise ConfigError(f"disallowed call in {expr!r}")
    code = compile(tree, "<field>", "eval")

    def f(x, y):
        val = eval(code, {"__builtins__": {}}, {"x": x, "y": y, **_FUNCS, **_NAMES})
        return np.broadcast_to(np.asarray(val, dtype=float), np.shape(x)).copy()

    f.expr = str(expr)
    return f


@dataclass(frozen=True)
class Poisson:
    source: object = 1.0
    dirichlet: tuple = ("left",)
    space_kind = "scalar"
    ncomp = 1

    def load_values(self, pts):
        return compile_field(self.source)(pts[:, 0], pts[:, 1])[:, None]

    def lame(self):
        return 0.0, 0.0


@dataclass(frozen=True)
class Elasticity:
    body_force: tuple = (0.0, -1.0)
    material: MaterialParams = field(default_factory=lambda: MaterialParams(1.0, 0.3))
    dirichlet: tuple = ("left",)
    space_kind = "vector2"
    ncomp = 2

    def load_values(self, pts):
        fx, fy = (compile_field(c) for c in self.body_force)
        return np.column_stack([fx(pts[:, 0], pts[:, 1]), fy(pts[:, 0], pts[:, 1])])

    def lame(self):
        return self.material.lame_lambda, self.material.lame_mu


@dataclass
class RawOperators:
    """Pre-elimination operators in background-CSR data layout."""

    stiffness: np.ndarray
    norm: np.ndarray
    rhs: np.ndarray
    active: np.ndarray
    element_class: np.ndarray
    quadrature_area: float
    n_cut: int


@dataclass(eq=False)
class FomSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    active_map: ActiveDofMap
    norm_matrix: sp.csr_matrix
    space: FeSpace
    mu: np.ndarray
    stats: dict

    @property
    def data(self):
        """Matrix values aligned with the space's background pattern."""
        return self.matrix.data

    def pattern(self):
        """Structural pattern of this system: nonzero entries plus the diagonal."""
        keep = self.matrix.data != 0.0
        keep[self.space.diag_pos] = True
        return SparsityPattern(self.space.total_dofs, self.space.pattern.rows[keep], self.space.pattern.cols[keep])


def assemble_raw(problem, holes, space, depth=6):
    """Integrate stiffness, H1 norm matrix and load over the cut domain, before any elimination."""
    if depth < 1:
        raise ConfigError("quadrature depth must be >= 1")
    mesh = space.mesh
    ncomp = problem.ncomp
    lam, mu_l = problem.lame()
    boxes = mesh.element_boxes
    cls = classify_boxes(boxes, holes)
    inside = np.flatnonzero(cls == ElementClass.FULLY_INSIDE.value)
    cut = np.flatnonzero(cls == ElementClass.CUT.value)
    nl = 4 * ncomp
    ne = mesh.n_elements

    rpts, rw = space.reference_rule()
    Kref, Xref, _ = kernels.element_integrals(
        rpts, rw, np.array([0, 4], dtype=np.int64), np.ascontiguousarray(boxes[:1]),
        np.zeros((4, ncomp)), ncomp, lam, mu_l)

    K = np.zeros((ne, nl, nl))
    X = np.zeros((ne, nl, nl))
    F = np.zeros((ne, nl))
    K[inside] = Kref[0]
    X[inside] = Xref[0]

    # loads on full elements: 2x2 Gauss with physical points
    gp = space.gauss_points[inside].reshape(-1, 2)
    fv = problem.load_values(gp).reshape(len(inside), 4, ncomp)
    xi = GAUSS_1D[[0, 1, 0, 1]]
    eta = GAUSS_1D[[0, 0, 1, 1]]
    Nref = np.stack([(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta], axis=1)  # (g, a)
    wq = 0.25 * mesh.hx * mesh.hy
    F[inside] = (wq * np.einsum("ga,egc->eac", Nref, fv)).reshape(len(inside), nl)

    quad_area = len(inside) * mesh.hx * mesh.hy
    contributing = np.zeros(ne, dtype=bool)
    contributing[inside] = True
    if len(cut):
        cboxes = np.ascontiguousarray(boxes[cut])
        pts, w, off = kernels.cut_rules(
            cboxes, np.ascontiguousarray(holes.centers[:, 0]), np.ascontiguousarray(holes.centers[:, 1]),
            np.ascontiguousarray(holes.radii), int(depth))
        fvals = np.ascontiguousarray(problem.load_values(pts)) if len(pts) else np.zeros((0, ncomp))
        Kc, Xc, Fc = kernels.element_integrals(pts, w, off, cboxes, fvals, ncomp, lam, mu_l)
        K[cut], X[cut], F[cut] = Kc, Xc, Fc
        contributing[cut] = off[1:] > off[:-1]
        quad_area += float(w.sum())

    used = np.flatnonzero(contributing)
    pos = space.elem_pos[used].ravel()
    nnz = space.nnz
    kdata = np.bincount(pos, weights=K[used].ravel(), minlength=nnz)
    xdata = np.bincount(pos, weights=X[used].ravel(), minlength=nnz)
    rhs = np.bincount(space.connectivity[used].ravel(), weights=F[used].ravel(), minlength=space.total_dofs)
    active = np.zeros(space.total_dofs, dtype=bool)
    active[space.connectivity[used].ravel()] = True
    return RawOperators(kdata, xdata, rhs, active, cls, quad_area, int(len(cut)))


def dirichlet_mask(problem, space):
    mask = np.zeros(space.total_dofs, dtype=bool)
    for edge in problem.dirichlet:
        mask[space.dofs_of_nodes(space.mesh.edge_nodes(edge))] = True
    return mask


def eliminate(data, space, nonfree):
    """Zero rows/columns of non-free DOFs and put a unit on their diagonal."""
    out = np.array(data, dtype=float, copy=True)
    out[nonfree[space.entry_rows] | nonfree[space.indices]] = 0.0
    out[space.diag_pos[nonfree]] = 1.0
    return out


def assemble(problem, spec, mu, mesh, space, depth=6):
    if space.kind != problem.space_kind:
        raise ConfigError(f"{type(problem).__name__} needs a {problem.space_kind} space, got {space.kind}")
    holes = resolve_holes(spec, mu)
    raw = assemble_raw(problem, holes, space, depth)
    if not raw.active.any():
        raise DegenerateGeometryError(f"no active DOFs at mu={np.asarray(mu).tolist()}")
    dof_map = ActiveDofMap(raw.active, dirichlet_mask(problem, space))
    if dof_map.free_count == 0:
        raise DegenerateGeometryError(f"no free DOFs at mu={np.asarray(mu).tolist()}")
    nonfree = ~dof_map.free
    A = space.csr(eliminate(raw.stiffness, space, nonfree))
    X = space.csr(eliminate(raw.norm, space, nonfree))
    f = np.where(nonfree, 0.0, raw.rhs)
    stats = {
        "n_cut": raw.n_cut,
        "depth": int(depth),
        "quadrature_area": raw.quadrature_area,
        "exact_area": spec.area - holes.area,
        "active_dofs": dof_map.active_count,
        "free_dofs": dof_map.free_count,
    }
    return FomSystem(A, f, dof_map, X, space, np.atleast_1d(np.asarray(mu, dtype=float)), stats)


def solve_sparse(matrix, rhs, tol=1e-10):
    """Direct solve with symmetric diagonal scaling and a relative-residual check.

    Small-cut DOFs have tiny diagonal entries; scaling by ``diag(A)**-1/2`` removes that
    source of ill-conditioning before the factorization.
    """
    rhs = np.asarray(rhs, dtype=float)
    if not np.any(rhs):
        return np.zeros_like(rhs)
    diag = np.abs(matrix.diagonal())
    d = 1.0 / np.sqrt(np.where(diag > 0.0, diag, 1.0))
    D = sp.diags(d)
    lu = spla.splu(sp.csc_matrix(D @ matrix @ D))
    u = d * lu.solve(d * rhs)
    res = float(np.linalg.norm(matrix @ u - rhs) / np.linalg.norm(rhs))
    if not np.isfinite(res) or res > tol:
        raise NumericError(f"sparse solve residual {res:.3e} exceeds {tol:.1e}", residual=res)
    return u


def solve_fom(system, tol=1e-10):
    u = solve_sparse(system.matrix, system.rhs, tol)
    u[~system.active_map.free] = 0.0
    return u


def error_norms(u, v, system_ref):
    """Relative l2 and discrete H1 errors of ``u`` against reference ``v`` on the free DOFs."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ConfigError(f"shape mismatch {u.shape} vs {v.shape}")
    free = system_ref.active_map.free
    e = np.where(free, u - v, 0.0)
    vf = np.where(free, v, 0.0)
    den_l2 = np.linalg.norm(vf)
    den_h1 = float(vf @ (system_ref.norm_matrix @ vf))
    if den_l2 == 0.0 or den_h1 <= 0.0:
        raise NumericError("reference vector has zero norm; relative error undefined")
    rel_l2 = float(np.linalg.norm(e) / den_l2)
    rel_h1 = float(np.sqrt(max(e @ (system_ref.norm_matrix @ e), 0.0) / den_h1))
    return rel_l2, rel_h1


def function_l2_error(space, u, exact, holes=None):
    """Continuous L2 error of a scalar Q1 field against ``exact(x, y)`` with 3x3 Gauss on full elements."""
    mesh = space.mesh
    g, gw = np.polynomial.legendre.leggauss(3)
    g = 0.5 * (g + 1.0)
    gw = 0.5 * gw
    xi, eta = np.meshgrid(g, g)
    xi, eta = xi.ravel(), eta.ravel()
    w = np.outer(gw, gw).ravel() * mesh.hx * mesh.hy
    N = np.stack([(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta], axis=1)
    boxes = mesh.element_boxes
    keep = np.ones(mesh.n_elements, dtype=bool)
    if holes is not None:
        keep = classify_boxes(boxes, holes) == ElementClass.FULLY_INSIDE.value
    b = boxes[keep]
    x = b[:, 0:1] + xi[None, :] * mesh.hx
    y = b[:, 1:2] + eta[None, :] * mesh.hy
    uh = u[space.connectivity[keep]] @ N.T
    err = (uh - exact(x, y)) ** 2
    return float(np.sqrt(np.sum(err * w[None, :])))


@dataclass
class FomRunner:
    """Bundles problem, geometry and discretization for repeated solves."""

    problem: object
    spec: object
    mesh: BackgroundMesh
    depth: int = 6
    space: FeSpace = None

    def __post_init__(self):
        if self.space is None:
            self.space = FeSpace(self.mesh, self.problem.space_kind)

    def assemble(self, mu):
        return assemble(self.problem, self.spec, mu, self.mesh, self.space, self.depth)

    def solve(self, mu):
        """Assemble and solve; returns (system, solution, seconds)."""
        t0 = time.perf_counter()
        system = self.assemble(mu)
        u = solve_fom(system)
        return system, u, time.perf_counter() - t0
