# cython: language_level=3
"""Compiled inner loops for point location and radial-profile convolution.

Both functions mirror :mod:`plume._kernels_py` exactly (same arguments, same
results up to summation order). Selection happens in :mod:`plume.kernels`.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, floor

cnp.import_array()

BACKEND = "cython"


def locate_points(const double[:, ::1] nodes, const cnp.int64_t[:, ::1] tris,
                  const double[:, ::1] pts, const cnp.int64_t[::1] bucket_ptr,
                  const cnp.int64_t[::1] bucket_tris, double x0, double y0,
                  double bw, double bh, Py_ssize_t nbx, Py_ssize_t nby, double tol):
    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t i, k, t, ix, iy, b
    cdef cnp.int64_t ia, ib, ic
    cdef double px, py, xa, ya, xb, yb, xc, yc, det, lb, lc, la, s
    out_tri = np.full(n, -1, dtype=np.int64)
    out_w = np.zeros((n, 3), dtype=np.float64)
    cdef cnp.int64_t[::1] otri = out_tri
    cdef double[:, ::1] ow = out_w

    with nogil:
        for i in range(n):
            px = pts[i, 0]
            py = pts[i, 1]
            ix = <Py_ssize_t> floor((px - x0) / bw)
            iy = <Py_ssize_t> floor((py - y0) / bh)
            if ix == nbx:
                ix = nbx - 1
            if iy == nby:
                iy = nby - 1
            if ix < 0 or iy < 0 or ix >= nbx or iy >= nby:
                continue
            b = iy * nbx + ix
            for k in range(bucket_ptr[b], bucket_ptr[b + 1]):
                t = bucket_tris[k]
                ia = tris[t, 0]
                ib = tris[t, 1]
                ic = tris[t, 2]
                xa = nodes[ia, 0]
                ya = nodes[ia, 1]
                xb = nodes[ib, 0]
                yb = nodes[ib, 1]
                xc = nodes[ic, 0]
                yc = nodes[ic, 1]
                det = (xb - xa) * (yc - ya) - (xc - xa) * (yb - ya)
                lb = ((px - xa) * (yc - ya) - (xc - xa) * (py - ya)) / det
                lc = ((xb - xa) * (py - ya) - (px - xa) * (yb - ya)) / det
                la = 1.0 - lb - lc
                if la >= -tol and lb >= -tol and lc >= -tol:
                    if la < 0.0:
                        la = 0.0
                    if lb < 0.0:
                        lb = 0.0
                    if lc < 0.0:
                        lc = 0.0
                    s = la + lb + lc
                    otri[i] = t
                    ow[i, 0] = la / s
                    ow[i, 1] = lb / s
                    ow[i, 2] = lc / s
                    break
    return out_tri, out_w


def rbf_convolve(const double[:, ::1] tgt, const double[:, ::1] src,
                 const double[::1] w, const cnp.int64_t[::1] cell_ptr,
                 double x0, double y0, double cell, Py_ssize_t ncx, Py_ssize_t ncy,
                 double coef, double cap, double cut2):
    cdef Py_ssize_t n = tgt.shape[0]
    cdef Py_ssize_t i, j, cx, cy, jx, jy, c, span
    cdef double px, py, dx, dy, d2, val, acc
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] o = out
    span = 1
    with nogil:
        for i in range(n):
            px = tgt[i, 0]
            py = tgt[i, 1]
            cx = <Py_ssize_t> floor((px - x0) / cell)
            cy = <Py_ssize_t> floor((py - y0) / cell)
            acc = 0.0
            for jy in range(cy - span, cy + span + 1):
                if jy < 0 or jy >= ncy:
                    continue
                for jx in range(cx - span, cx + span + 1):
                    if jx < 0 or jx >= ncx:
                        continue
                    c = jy * ncx + jx
                    for j in range(cell_ptr[c], cell_ptr[c + 1]):
                        dx = src[j, 0] - px
                        dy = src[j, 1] - py
                        d2 = dx * dx + dy * dy
                        if d2 > cut2:
                            continue
                        val = exp(coef * d2)
                        if val > cap:
                            val = cap
                        acc += val * w[j]
            o[i] = acc
    return out
