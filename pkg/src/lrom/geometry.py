"""Background box, parameterized circular holes and element classification."""

import ast
import itertools
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError, DomainViolationError


class ElementClass(Enum):
    FULLY_INSIDE = 0
    FULLY_OUTSIDE = 1
    CUT = 2


@dataclass(frozen=True)
class ParameterDomain:
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi) or not lo:
            raise ConfigError("parameter domain bounds must be nonempty and of equal length")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ConfigError(f"parameter domain needs lower < upper, got {lo} / {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self):
        return len(self.lower)

    @property
    def midpoint(self):
        return tuple(0.5 * (a + b) for a, b in zip(self.lower, self.upper))

    def vertices(self):
        return [np.array(v) for v in itertools.product(*zip(self.lower, self.upper))]

    def check(self, mu, tol=1e-12):
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        if mu.shape != (self.dim,):
            raise DomainViolationError(f"expected {self.dim} parameters, got shape {mu.shape}")
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        span = hi - lo
        if np.any(mu < lo - tol * span) or np.any(mu > hi + tol * span):
            raise DomainViolationError(f"parameter {mu.tolist()} outside domain {self.lower}..{self.upper}")
        return mu


@dataclass(frozen=True)
class Affine:
    """``const + coeffs . mu``."""

    const: float
    coeffs: tuple = ()

    def __call__(self, mu):
        c = np.asarray(self.coeffs, dtype=float)
        return float(self.const + (c @ np.asarray(mu, dtype=float)[: len(c)] if len(c) else 0.0))

    @classmethod
    def parse(cls, expr, n_params):
        """Parse a number or an affine string like ``"0.5 + 2*mu1 - mu2/4"``.

        Parameters are named ``mu1 .. muM`` (``mu`` alone means ``mu1``).
        """
        if isinstance(expr, (int, float)):
            return cls(float(expr), (0.0,) * n_params)
        if not isinstance(expr, str):
            raise ConfigError(f"hole rule entry must be a number or string, got {expr!r}")
        try:
            tree = ast.parse(expr, mode="eval").body
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse expression {expr!r}") from exc
        const, coeffs = _affine(tree, n_params, expr)
        return cls(float(const), tuple(float(c) for c in coeffs))

    def to_str(self):
        terms = [repr(float(self.const))]
        terms += [f"{float(c)!r}*mu{i + 1}" for i, c in enumerate(self.coeffs) if c != 0.0]
        return " + ".join(terms)


def _affine(node, n, src):
    zero = np.zeros(n)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value), zero
    if isinstance(node, ast.Name):
        name = node.id
        idx = 1 if name == "mu" else None
        if name.startswith("mu") and name[2:].isdigit():
            idx = int(name[2:])
        if idx is None or not 1 <= idx <= n:
            raise ConfigError(f"unknown symbol {name!r} in {src!r} (parameters are mu1..mu{n})")
        c = zero.copy()
        c[idx - 1] = 1.0
        return 0.0, c
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        k, c = _affine(node.operand, n, src)
        s = -1.0 if isinstance(node.op, ast.USub) else 1.0
        return s * k, s * c
    if isinstance(node, ast.BinOp):
        ka, ca = _affine(node.left, n, src)
        kb, cb = _affine(node.right, n, src)
        if isinstance(node.op, ast.Add):
            return ka + kb, ca + cb
        if isinstance(node.op, ast.Sub):
            return ka - kb, ca - cb
        if isinstance(node.op, ast.Mult):
            if not ca.any():
                return ka * kb, ka * cb
            if not cb.any():
                return ka * kb, kb * ca
        if isinstance(node.op, ast.Div) and not cb.any() and kb != 0.0:
            return ka / kb, ca / kb
    raise ConfigError(f"expression {src!r} is not affine in the parameters")


@dataclass(frozen=True)
class HoleRule:
    center_x: Affine
    center_y: Affine
    radius: Affine

    def resolve(self, mu):
        return (self.center_x(mu), self.center_y(mu)), self.radius(mu)


@dataclass(frozen=True)
class ResolvedHoles:
    centers: np.ndarray  # (h, 2)
    radii: np.ndarray  # (h,)

    def __len__(self):
        return len(self.radii)

    @property
    def area(self):
        return float(np.pi * np.sum(self.radii**2))


@dataclass(frozen=True)
class GeometrySpec:
    box: tuple  # (xmin, ymin, xmax, ymax)
    domain: ParameterDomain
    holes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        box = tuple(float(v) for v in self.box)
        if len(box) != 4 or box[0] >= box[2] or box[1] >= box[3]:
            raise ConfigError(f"box must be (xmin, ymin, xmax, ymax), got {self.box}")
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "holes", tuple(self.holes))
        # affine rules attain their extremes at the parameter-box vertices
        for mu in self.domain.vertices():
            for k, rule in enumerate(self.holes):
                (cx, cy), r = rule.resolve(mu)
                if r <= 0.0:
                    raise ConfigError(f"hole {k} has nonpositive radius {r} at mu={mu.tolist()}")
                if not (box[0] < cx - r and cx + r < box[2] and box[1] < cy - r and cy + r < box[3]):
                    raise ConfigError(f"hole {k} touches or leaves the box at mu={mu.tolist()}")

    @property
    def area(self):
        return (self.box[2] - self.box[0]) * (self.box[3] - self.box[1])

    @classmethod
    def from_dict(cls, d):
        dom = ParameterDomain(d["parameter_domain"]["lower"], d["parameter_domain"]["upper"])
        holes = []
        for h in d.get("holes", []):
            cx, cy = h["center"]
            holes.append(HoleRule(Affine.parse(cx, dom.dim), Affine.parse(cy, dom.dim),
                                  Affine.parse(h["radius"], dom.dim)))
        return cls(tuple(d["box"]), dom, tuple(holes))

    def to_dict(self):
        return {
            "box": list(self.box),
            "parameter_domain": {"lower": list(self.domain.lower), "upper": list(self.domain.upper)},
            "holes": [
                {"center": [h.center_x.to_str(), h.center_y.to_str()], "radius": h.radius.to_str()}
                for h in self.holes
            ],
        }


def resolve_holes(spec, mu):
    mu = spec.domain.check(mu)
    if not spec.holes:
        return ResolvedHoles(np.zeros((0, 2)), np.zeros(0))
    resolved = [rule.resolve(mu) for rule in spec.holes]
    centers = np.array([c for c, _ in resolved], dtype=float)
    radii = np.array([r for _, r in resolved], dtype=float)
    return ResolvedHoles(centers, radii)


def classify_boxes(boxes, holes):
    """Vectorized classification of ``(n, 4)`` rectangles; returns int codes of ElementClass."""
    boxes = np.asarray(boxes, dtype=float)
    n = len(boxes)
    out = np.full(n, ElementClass.FULLY_INSIDE.value, dtype=np.int8)
    if len(holes) == 0:
        return out
    x0, y0, x1, y1 = (boxes[:, i : i + 1] for i in range(4))
    cx = holes.centers[:, 0][None, :]
    cy = holes.centers[:, 1][None, :]
    r2 = (holes.radii**2)[None, :]
    dx = np.maximum(np.maximum(x0 - cx, cx - x1), 0.0)
    dy = np.maximum(np.maximum(y0 - cy, cy - y1), 0.0)
    fx = np.maximum(np.abs(cx - x0), x1 - cx)
    fy = np.maximum(np.abs(cy - y0), y1 - cy)
    outside = np.any(fx * fx + fy * fy <= r2, axis=1)
    touching = np.any(dx * dx + dy * dy < r2, axis=1)
    out[touching] = ElementClass.CUT.value
    out[outside] = ElementClass.FULLY_OUTSIDE.value
    return out


def classify_element(elem_box, holes):
    return ElementClass(int(classify_boxes(np.asarray(elem_box, dtype=float)[None, :], holes)[0]))


def point_in_domain(x, holes):
    """Closed-domain membership: points on a hole boundary belong to the domain."""
    if len(holes) == 0:
        return True
    d = holes.centers - np.asarray(x, dtype=float)[None, :]
    return bool(np.all(np.sum(d * d, axis=1) >= holes.radii**2))


def points_in_domain(xs, holes):
    xs = np.asarray(xs, dtype=float)
    if len(holes) == 0:
        return np.ones(len(xs), dtype=bool)
    d = xs[:, None, :] - holes.centers[None, :, :]
    return np.all(np.sum(d * d, axis=2) >= holes.radii[None, :] ** 2, axis=1)


def circle_hausdorff(c1, r1, c2, r2):
    """Hausdorff distance between two circles (as curves)."""
    d = float(np.hypot(*(np.asarray(c1, float) - np.asarray(c2, float))))
    # points of one circle lie at distances [|d - r|, d + r] from the other center
    a_to_b = max(abs(d + r1 - r2), abs(abs(d - r1) - r2))
    b_to_a = max(abs(d + r2 - r1), abs(abs(d - r2) - r1))
    return max(a_to_b, b_to_a)


def hole_boundary_distance(mu_a, mu_b, spec):
    """Largest per-hole Hausdorff distance between hole boundaries at two parameters."""
    ha = resolve_holes(spec, mu_a)
    hb = resolve_holes(spec, mu_b)
    if len(ha) != len(hb):
        raise ConfigError("hole counts differ")
    if len(ha) == 0:
        return 0.0
    return max(
        circle_hausdorff(ha.centers[i], ha.radii[i], hb.centers[i], hb.radii[i]) for i in range(len(ha))
    )
