"""Pure-numpy versions of the compiled kernels in ``_kernels.pyx``.

Same signatures and results; used when the extension is not built or when
``PLUME_PURE_PYTHON=1`` is set.
"""
import numpy as np

BACKEND = "python"

_CHUNK = 512


def locate_points(nodes, tris, pts, bucket_ptr, bucket_tris, x0, y0, bw, bh, nbx, nby, tol):
    n = pts.shape[0]
    out_tri = np.full(n, -1, dtype=np.int64)
    out_w = np.zeros((n, 3))
    if n == 0:
        return out_tri, out_w
    ix = np.floor((pts[:, 0] - x0) / bw).astype(np.int64)
    iy = np.floor((pts[:, 1] - y0) / bh).astype(np.int64)
    ix[ix == nbx] = nbx - 1
    iy[iy == nby] = nby - 1
    inside = (ix >= 0) & (iy >= 0) & (ix < nbx) & (iy < nby)
    bucket = np.where(inside, iy * nbx + ix, -1)

    order = np.argsort(bucket, kind="stable")
    sorted_b = bucket[order]
    starts = np.flatnonzero(np.r_[True, sorted_b[1:] != sorted_b[:-1]])
    ends = np.r_[starts[1:], len(sorted_b)]
    for s, e in zip(starts, ends):
        b = sorted_b[s]
        if b < 0:
            continue
        cand = bucket_tris[bucket_ptr[b]:bucket_ptr[b + 1]]
        if len(cand) == 0:
            continue
        q = order[s:e]
        p = pts[q]
        a = nodes[tris[cand, 0]]
        bb = nodes[tris[cand, 1]]
        c = nodes[tris[cand, 2]]
        det = (bb[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (bb[:, 1] - a[:, 1])
        dpx = p[:, None, 0] - a[None, :, 0]
        dpy = p[:, None, 1] - a[None, :, 1]
        lb = (dpx * (c[None, :, 1] - a[None, :, 1]) - (c[None, :, 0] - a[None, :, 0]) * dpy) / det
        lc = ((bb[None, :, 0] - a[None, :, 0]) * dpy - dpx * (bb[None, :, 1] - a[None, :, 1])) / det
        la = 1.0 - lb - lc
        ok = (la >= -tol) & (lb >= -tol) & (lc >= -tol)
        hit = ok.any(axis=1)
        first = np.argmax(ok, axis=1)
        rows = np.flatnonzero(hit)
        cols = first[rows]
        w = np.stack([la[rows, cols], lb[rows, cols], lc[rows, cols]], axis=1)
        w = np.clip(w, 0.0, None)
        w /= w.sum(axis=1, keepdims=True)
        out_tri[q[rows]] = cand[cols]
        out_w[q[rows]] = w
    return out_tri, out_w


def rbf_convolve(tgt, src, w, cell_ptr, x0, y0, cell, ncx, ncy, coef, cap, cut2):
    # cell structure is irrelevant for the dense evaluation, only the cutoff matters
    out = np.zeros(tgt.shape[0])
    for s in range(0, tgt.shape[0], _CHUNK):
        t = tgt[s:s + _CHUNK]
        d2 = (t[:, None, 0] - src[None, :, 0]) ** 2 + (t[:, None, 1] - src[None, :, 1]) ** 2
        with np.errstate(over="ignore"):
            val = np.minimum(np.exp(coef * d2), cap)
        val[d2 > cut2] = 0.0
        out[s:s + _CHUNK] = val @ w
    return out
