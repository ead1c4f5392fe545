"""Backend selection for the hot loops.

The compiled extension ``plume._kernels`` is used when it was built; otherwise,
or when the environment variable ``PLUME_PURE_PYTHON`` is set to ``1``, the
numpy implementation in ``plume._kernels_py`` is used. Both expose the same
low-level functions; this module adds the spatial bucketing they share.
"""
import math
import os

import numpy as np

from . import _kernels_py

if os.environ.get("PLUME_PURE_PYTHON") == "1":
    _backend = _kernels_py
else:
    try:
        from . import _kernels as _backend
    except ImportError:  # extension not built
        _backend = _kernels_py

BACKEND = _backend.BACKEND


def available_backends():
    """Names of the importable kernel backends, preferred first."""
    names = []
    try:
        from . import _kernels  # noqa: F401
        names.append("cython")
    except ImportError:
        pass
    names.append("python")
    return names


def _module(backend):
    if backend is None:
        return _backend
    if backend == "python":
        return _kernels_py
    if backend == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown kernel backend {backend!r}")


class TriangleBuckets:
    """Uniform grid of buckets, each listing the triangles whose (padded)
    bounding box touches it, in ascending triangle order."""

    def __init__(self, nodes, triangles, pad=1e-9):
        nodes = np.ascontiguousarray(nodes, dtype=np.float64)
        tris = np.ascontiguousarray(triangles, dtype=np.int64)
        lo = nodes.min(axis=0)
        hi = nodes.max(axis=0)
        ext = np.maximum(hi - lo, 1e-300)
        nb = max(1, int(math.sqrt(len(tris) / 2.0)))
        aspect = ext[0] / ext[1]
        nbx = max(1, int(round(nb * math.sqrt(aspect))))
        nby = max(1, int(round(nb / math.sqrt(aspect))))
        bw, bh = ext[0] / nbx, ext[1] / nby

        xy = nodes[tris]
        tlo = xy.min(axis=1) - pad * ext
        thi = xy.max(axis=1) + pad * ext
        ix0 = np.clip(np.floor((tlo[:, 0] - lo[0]) / bw), 0, nbx - 1).astype(np.int64)
        ix1 = np.clip(np.floor((thi[:, 0] - lo[0]) / bw), 0, nbx - 1).astype(np.int64)
        iy0 = np.clip(np.floor((tlo[:, 1] - lo[1]) / bh), 0, nby - 1).astype(np.int64)
        iy1 = np.clip(np.floor((thi[:, 1] - lo[1]) / bh), 0, nby - 1).astype(np.int64)

        pair_b, pair_t = [], []
        tid = np.arange(len(tris), dtype=np.int64)
        for dy in range(int((iy1 - iy0).max(initial=0)) + 1):
            for dx in range(int((ix1 - ix0).max(initial=0)) + 1):
                m = (ix0 + dx <= ix1) & (iy0 + dy <= iy1)
                pair_b.append((iy0[m] + dy) * nbx + ix0[m] + dx)
                pair_t.append(tid[m])
        pb = np.concatenate(pair_b) if pair_b else np.zeros(0, np.int64)
        pt = np.concatenate(pair_t) if pair_t else np.zeros(0, np.int64)
        order = np.lexsort((pt, pb))
        self.bucket_tris = np.ascontiguousarray(pt[order])
        counts = np.bincount(pb, minlength=nbx * nby)
        self.bucket_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self.nodes = nodes
        self.triangles = tris
        self.origin = (float(lo[0]), float(lo[1]))
        self.size = (float(bw), float(bh))
        self.shape = (nbx, nby)

    def locate(self, points, tol=1e-12, backend=None):
        """Return ``(tri, weights)``; ``tri`` is -1 where nothing contains the point."""
        pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
        return _module(backend).locate_points(
            self.nodes, self.triangles, pts, self.bucket_ptr, self.bucket_tris,
            self.origin[0], self.origin[1], self.size[0], self.size[1],
            self.shape[0], self.shape[1], tol)


def radial_convolve(targets, sources, weights, coef, cap, cutoff, backend=None):
    """Evaluate ``sum_j min(cap, exp(coef * |t - s_j|^2)) * w_j`` for each target,
    dropping pairs further apart than ``cutoff``."""
    tgt = np.ascontiguousarray(np.atleast_2d(targets), dtype=np.float64)
    src = np.asarray(sources, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    keep = w != 0.0
    src, w = src[keep], w[keep]
    if len(w) == 0 or len(tgt) == 0:
        return np.zeros(len(tgt))
    allpts = np.vstack([tgt, src])
    lo = allpts.min(axis=0)
    ext = float(np.max(allpts.max(axis=0) - lo))
    if not np.isfinite(cutoff) or cutoff >= ext:
        cell = max(ext, 1e-300) * (1.0 + 1e-12)
    else:
        cell = max(cutoff, ext / 4096.0)
    ncx = int((allpts[:, 0].max() - lo[0]) // cell) + 1
    ncy = int((allpts[:, 1].max() - lo[1]) // cell) + 1
    cx = np.floor((src[:, 0] - lo[0]) / cell).astype(np.int64)
    cy = np.floor((src[:, 1] - lo[1]) / cell).astype(np.int64)
    cid = cy * ncx + cx
    order = np.argsort(cid, kind="stable")
    counts = np.bincount(cid, minlength=ncx * ncy)
    ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    cut2 = float(cutoff) ** 2 if np.isfinite(cutoff) else math.inf
    return _module(backend).rbf_convolve(
        tgt, np.ascontiguousarray(src[order]), np.ascontiguousarray(w[order]), ptr,
        float(lo[0]), float(lo[1]), float(cell), ncx, ncy, float(coef), float(cap), cut2)
