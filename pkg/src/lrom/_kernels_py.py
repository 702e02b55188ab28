"""Pure-Python/NumPy implementations of the compiled kernels.

Used when the Cython extension is not built, and as the reference the
compiled path is benchmarked and tested against.
"""

import numpy as np

INSIDE, OUTSIDE, CUT = 0, 1, 2

_G = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))


def _classify(x0, y0, x1, y1, cx, cy, r):
    all_inside = True
    for h in range(len(r)):
        r2 = r[h] * r[h]
        dx = max(x0 - cx[h], cx[h] - x1, 0.0)
        dy = max(y0 - cy[h], cy[h] - y1, 0.0)
        fx = max(abs(cx[h] - x0), x1 - cx[h])
        fy = max(abs(cy[h] - y0), y1 - cy[h])
        if fx * fx + fy * fy <= r2:
            return OUTSIDE
        if dx * dx + dy * dy < r2:
            all_inside = False
    return INSIDE if all_inside else CUT


def _in_domain(x, y, cx, cy, r):
    for h in range(len(r)):
        dx = x - cx[h]
        dy = y - cy[h]
        if dx * dx + dy * dy < r[h] * r[h]:
            return False
    return True


def _rule(x0, y0, x1, y1, level, depth, cx, cy, r, out):
    cls = _classify(x0, y0, x1, y1, cx, cy, r)
    if cls == OUTSIDE:
        return
    if cls == CUT and level < depth:
        xm = 0.5 * (x0 + x1)
        ym = 0.5 * (y0 + y1)
        _rule(x0, y0, xm, ym, level + 1, depth, cx, cy, r, out)
        _rule(xm, y0, x1, ym, level + 1, depth, cx, cy, r, out)
        _rule(x0, ym, xm, y1, level + 1, depth, cx, cy, r, out)
        _rule(xm, ym, x1, y1, level + 1, depth, cx, cy, r, out)
        return
    hx = x1 - x0
    hy = y1 - y0
    w = 0.25 * hx * hy
    for gb in _G:
        gy = y0 + gb * hy
        for ga in _G:
            gx = x0 + ga * hx
            if cls == INSIDE or _in_domain(gx, gy, cx, cy, r):
                out.append((gx, gy, w))


def cut_rules(boxes, cx, cy, r, depth):
    cx = [float(v) for v in cx]
    cy = [float(v) for v in cy]
    r = [float(v) for v in r]
    out = []
    offsets = np.zeros(len(boxes) + 1, dtype=np.int64)
    for e, (x0, y0, x1, y1) in enumerate(np.asarray(boxes).tolist()):
        _rule(x0, y0, x1, y1, 0, depth, cx, cy, r, out)
        offsets[e + 1] = len(out)
    if out:
        arr = np.array(out, dtype=np.float64)
        return np.ascontiguousarray(arr[:, :2]), np.ascontiguousarray(arr[:, 2]), offsets
    return np.zeros((0, 2)), np.zeros(0), offsets


def element_integrals(pts, w, offsets, boxes, fvals, ncomp, lam, mu):
    n = len(boxes)
    nl = 4 * ncomp
    K = np.zeros((n, nl, nl))
    X = np.zeros((n, nl, nl))
    F = np.zeros((n, nl))
    for e in range(n):
        lo, hi = offsets[e], offsets[e + 1]
        if hi == lo:
            continue
        x0, y0, x1, y1 = boxes[e]
        hx, hy = x1 - x0, y1 - y0
        xi = (pts[lo:hi, 0] - x0) / hx
        eta = (pts[lo:hi, 1] - y0) / hy
        wk = w[lo:hi]
        N = np.stack([(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta], axis=1)
        Gx = np.stack([-(1 - eta), 1 - eta, eta, -eta], axis=1) / hx
        Gy = np.stack([-(1 - xi), -xi, xi, 1 - xi], axis=1) / hy
        gg = np.einsum("k,ka,kb->ab", wk, Gx, Gx) + np.einsum("k,ka,kb->ab", wk, Gy, Gy)
        nn = np.einsum("k,ka,kb->ab", wk, N, N)
        if ncomp == 1:
            K[e] = gg
            X[e] = gg + nn
            F[e] = np.einsum("k,ka,k->a", wk, N, fvals[lo:hi, 0])
        else:
            xx = np.einsum("k,ka,kb->ab", wk, Gx, Gx)
            yy = np.einsum("k,ka,kb->ab", wk, Gy, Gy)
            xy = np.einsum("k,ka,kb->ab", wk, Gx, Gy)
            K[e, 0::2, 0::2] = (lam + 2 * mu) * xx + mu * yy
            K[e, 0::2, 1::2] = lam * xy + mu * xy.T
            K[e, 1::2, 0::2] = lam * xy.T + mu * xy
            K[e, 1::2, 1::2] = (lam + 2 * mu) * yy + mu * xx
            X[e, 0::2, 0::2] = gg + nn
            X[e, 1::2, 1::2] = gg + nn
            F[e, 0::2] = np.einsum("k,ka,k->a", wk, N, fvals[lo:hi, 0])
            F[e, 1::2] = np.einsum("k,ka,k->a", wk, N, fvals[lo:hi, 1])
    return K, X, F


_FNV_OFFSET = 14695981039346656037
_FNV_PRIME = 1099511628211
_MASK = (1 << 64) - 1


def fnv1a64_pairs(rows, cols):
    pairs = np.empty((len(rows), 2), dtype="<i8")
    pairs[:, 0] = rows
    pairs[:, 1] = cols
    h = _FNV_OFFSET
    for byte in pairs.tobytes():
        h = ((h ^ byte) * _FNV_PRIME) & _MASK
    return h
