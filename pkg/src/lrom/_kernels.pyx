# distutils: language = c++
"""Compiled hot loops: quadtree cut-cell quadrature, Q1 element integrals, FNV-1a.

Signatures and results mirror :mod:`lrom._kernels_py` exactly.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt
from libcpp.vector cimport vector

cnp.import_array()

cdef int INSIDE = 0
cdef int OUTSIDE = 1
cdef int CUT = 2

cdef double G0 = 0.5 - 0.5 / sqrt(3.0)
cdef double G1 = 0.5 + 0.5 / sqrt(3.0)


cdef inline int _classify(double x0, double y0, double x1, double y1,
                          const double* cx, const double* cy, const double* r,
                          Py_ssize_t nh) noexcept nogil:
    cdef Py_ssize_t h
    cdef double dx, dy, fx, fy, r2
    cdef bint all_inside = True
    for h in range(nh):
        r2 = r[h] * r[h]
        dx = x0 - cx[h]
        if cx[h] - x1 > dx:
            dx = cx[h] - x1
        if dx < 0.0:
            dx = 0.0
        dy = y0 - cy[h]
        if cy[h] - y1 > dy:
            dy = cy[h] - y1
        if dy < 0.0:
            dy = 0.0
        fx = cx[h] - x0
        if fx < 0.0:
            fx = -fx
        if x1 - cx[h] > fx:
            fx = x1 - cx[h]
        fy = cy[h] - y0
        if fy < 0.0:
            fy = -fy
        if y1 - cy[h] > fy:
            fy = y1 - cy[h]
        if fx * fx + fy * fy <= r2:
            return OUTSIDE
        if dx * dx + dy * dy < r2:
            all_inside = False
    if all_inside:
        return INSIDE
    return CUT


cdef inline bint _in_domain(double x, double y, const double* cx, const double* cy,
                            const double* r, Py_ssize_t nh) noexcept nogil:
    cdef Py_ssize_t h
    cdef double dx, dy
    for h in range(nh):
        dx = x - cx[h]
        dy = y - cy[h]
        if dx * dx + dy * dy < r[h] * r[h]:
            return False
    return True


cdef void _rule(double x0, double y0, double x1, double y1, int level, int depth,
                const double* cx, const double* cy, const double* r, Py_ssize_t nh,
                vector[double]& px, vector[double]& py, vector[double]& pw) noexcept nogil:
    cdef int cls = _classify(x0, y0, x1, y1, cx, cy, r, nh)
    cdef double hx = x1 - x0
    cdef double hy = y1 - y0
    cdef double w = 0.25 * hx * hy
    cdef double xm, ym, gx, gy
    cdef int a, b
    if cls == OUTSIDE:
        return
    if cls == CUT and level < depth:
        xm = 0.5 * (x0 + x1)
        ym = 0.5 * (y0 + y1)
        _rule(x0, y0, xm, ym, level + 1, depth, cx, cy, r, nh, px, py, pw)
        _rule(xm, y0, x1, ym, level + 1, depth, cx, cy, r, nh, px, py, pw)
        _rule(x0, ym, xm, y1, level + 1, depth, cx, cy, r, nh, px, py, pw)
        _rule(xm, ym, x1, y1, level + 1, depth, cx, cy, r, nh, px, py, pw)
        return
    for b in range(2):
        gy = y0 + (G0 if b == 0 else G1) * hy
        for a in range(2):
            gx = x0 + (G0 if a == 0 else G1) * hx
            if cls == INSIDE or _in_domain(gx, gy, cx, cy, r, nh):
                px.push_back(gx)
                py.push_back(gy)
                pw.push_back(w)


def cut_rules(const double[:, ::1] boxes, const double[::1] cx, const double[::1] cy,
              const double[::1] r, int depth):
    cdef Py_ssize_t n = boxes.shape[0]
    cdef Py_ssize_t nh = r.shape[0]
    cdef vector[double] px, py, pw
    cdef cnp.ndarray[cnp.int64_t, ndim=1] offsets = np.zeros(n + 1, dtype=np.int64)
    cdef Py_ssize_t e, k, npts
    cdef const double* pcx = &cx[0] if nh > 0 else NULL
    cdef const double* pcy = &cy[0] if nh > 0 else NULL
    cdef const double* pr = &r[0] if nh > 0 else NULL
    with nogil:
        for e in range(n):
            _rule(boxes[e, 0], boxes[e, 1], boxes[e, 2], boxes[e, 3], 0, depth,
                  pcx, pcy, pr, nh, px, py, pw)
            offsets[e + 1] = <cnp.int64_t> pw.size()
    npts = pw.size()
    pts = np.empty((npts, 2), dtype=np.float64)
    w = np.empty(npts, dtype=np.float64)
    cdef double[:, ::1] pv = pts
    cdef double[::1] wv = w
    for k in range(npts):
        pv[k, 0] = px[k]
        pv[k, 1] = py[k]
        wv[k] = pw[k]
    return pts, w, offsets


def element_integrals(const double[:, ::1] pts, const double[::1] w, const cnp.int64_t[::1] offsets,
                      const double[:, ::1] boxes, const double[:, ::1] fvals, int ncomp,
                      double lam, double mu):
    cdef Py_ssize_t n = boxes.shape[0]
    cdef Py_ssize_t nl = 4 * ncomp
    K = np.zeros((n, nl, nl), dtype=np.float64)
    X = np.zeros((n, nl, nl), dtype=np.float64)
    F = np.zeros((n, nl), dtype=np.float64)
    cdef double[:, :, ::1] Kv = K
    cdef double[:, :, ::1] Xv = X
    cdef double[:, ::1] Fv = F
    cdef Py_ssize_t e, k, a, b
    cdef double x0, y0, hx, hy, xi, eta, wk, gab, nab
    cdef double N[4]
    cdef double Gx[4]
    cdef double Gy[4]
    cdef double l2m = lam + 2.0 * mu
    with nogil:
        for e in range(n):
            x0 = boxes[e, 0]
            y0 = boxes[e, 1]
            hx = boxes[e, 2] - x0
            hy = boxes[e, 3] - y0
            for k in range(offsets[e], offsets[e + 1]):
                xi = (pts[k, 0] - x0) / hx
                eta = (pts[k, 1] - y0) / hy
                wk = w[k]
                N[0] = (1.0 - xi) * (1.0 - eta)
                N[1] = xi * (1.0 - eta)
                N[2] = xi * eta
                N[3] = (1.0 - xi) * eta
                Gx[0] = -(1.0 - eta) / hx
                Gx[1] = (1.0 - eta) / hx
                Gx[2] = eta / hx
                Gx[3] = -eta / hx
                Gy[0] = -(1.0 - xi) / hy
                Gy[1] = -xi / hy
                Gy[2] = xi / hy
                Gy[3] = (1.0 - xi) / hy
                for a in range(4):
                    for b in range(4):
                        gab = wk * (Gx[a] * Gx[b] + Gy[a] * Gy[b])
                        nab = wk * N[a] * N[b]
                        if ncomp == 1:
                            Kv[e, a, b] += gab
                            Xv[e, a, b] += gab + nab
                        else:
                            Kv[e, 2 * a, 2 * b] += wk * (l2m * Gx[a] * Gx[b] + mu * Gy[a] * Gy[b])
                            Kv[e, 2 * a, 2 * b + 1] += wk * (lam * Gx[a] * Gy[b] + mu * Gy[a] * Gx[b])
                            Kv[e, 2 * a + 1, 2 * b] += wk * (lam * Gy[a] * Gx[b] + mu * Gx[a] * Gy[b])
                            Kv[e, 2 * a + 1, 2 * b + 1] += wk * (l2m * Gy[a] * Gy[b] + mu * Gx[a] * Gx[b])
                            Xv[e, 2 * a, 2 * b] += gab + nab
                            Xv[e, 2 * a + 1, 2 * b + 1] += gab + nab
                    if ncomp == 1:
                        Fv[e, a] += wk * N[a] * fvals[k, 0]
                    else:
                        Fv[e, 2 * a] += wk * N[a] * fvals[k, 0]
                        Fv[e, 2 * a + 1] += wk * N[a] * fvals[k, 1]
    return K, X, F


def fnv1a64_pairs(const cnp.int64_t[::1] rows, const cnp.int64_t[::1] cols):
    cdef unsigned long long h = 14695981039346656037ULL
    cdef unsigned long long prime = 1099511628211ULL
    cdef unsigned long long v
    cdef Py_ssize_t i, j, n = rows.shape[0]
    with nogil:
        for i in range(n):
            v = <unsigned long long> rows[i]
            for j in range(8):
                h = (h ^ ((v >> (8 * j)) & 0xFF)) * prime
            v = <unsigned long long> cols[i]
            for j in range(8):
                h = (h ^ ((v >> (8 * j)) & 0xFF)) * prime
    return int(h)
