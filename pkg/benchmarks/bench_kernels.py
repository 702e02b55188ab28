"""Compare the compiled and NumPy kernel backends on the cut elements of the 1D benchmark.

Usage: python3 benchmarks/bench_kernels.py [--nx 64] [--repeat 5]
"""

import argparse
import time

import numpy as np

from lrom import _kernels_py
from lrom.fom import Poisson, build_mesh
from lrom.config import builtin
from lrom.geometry import ElementClass, GeometrySpec, classify_boxes, resolve_holes

try:
    from lrom import _kernels
except ImportError:
    _kernels = None


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def run(nx, repeat, depth):
    spec = GeometrySpec.from_dict(builtin("poisson_1d")["geometry"])
    mesh = build_mesh(spec.box, nx, nx)
    holes = resolve_holes(spec, [1.0])
    boxes = mesh.element_boxes
    cut = np.ascontiguousarray(boxes[classify_boxes(boxes, holes) == ElementClass.CUT.value])
    cx = np.ascontiguousarray(holes.centers[:, 0])
    cy = np.ascontiguousarray(holes.centers[:, 1])
    r = np.ascontiguousarray(holes.radii)
    prob = Poisson()
    backends = [("python", _kernels_py)] + ([("cython", _kernels)] if _kernels is not None else [])
    results = {}
    print(f"mesh {nx}x{nx}, {len(cut)} cut elements, depth {depth}")
    for name, mod in backends:
        t_rule, (pts, w, off) = _best(lambda: mod.cut_rules(cut, cx, cy, r, depth), repeat)
        fv = np.ascontiguousarray(prob.load_values(pts))
        t_int, (K, X, F) = _best(lambda: mod.element_integrals(pts, w, off, cut, fv, 1, 0.0, 0.0), repeat)
        results[name] = (t_rule, t_int, K, w)
        print(f"  {name:7s} cut_rules {1e3 * t_rule:9.3f} ms   element_integrals {1e3 * t_int:9.3f} ms")
    if len(results) == 2:
        p, c = results["python"], results["cython"]
        dk = np.max(np.abs(p[2] - c[2])) / np.max(np.abs(p[2]))
        print(f"  speedup cut_rules {p[0] / c[0]:.1f}x, element_integrals {p[1] / c[1]:.1f}x, "
              f"max rel. stiffness difference {dk:.2e}, quadrature points {len(p[3])} vs {len(c[3])}")
    else:
        print("  compiled backend not built; only the NumPy fallback was timed")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nx", type=int, nargs="+", default=[32, 64])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--depth", type=int, default=6)
    a = ap.parse_args()
    for nx in a.nx:
        run(nx, a.repeat, a.depth)


if __name__ == "__main__":
    main()
