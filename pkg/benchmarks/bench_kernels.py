"""Compare the compiled and numpy kernel backends.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]

Times point location on a 128 x 128 two-building mesh and the radial
convolution used by the RBF dual field, and checks that both backends agree.
"""
import argparse
import time

import numpy as np

from plume import kernels
from plume.mesh import build_rect_mesh
from plume.sources import RBF, RBF_CAP

HOLES = [[0.25, 0.15, 0.5, 0.4], [0.6, 0.6, 0.75, 0.85]]


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--n", type=int, default=128)
    args = parser.parse_args()

    mesh = build_rect_mesh((0, 0, 1, 1), args.n, args.n, HOLES)
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 1, (20000, 2))
    shape = RBF(0.26)
    weights = rng.standard_normal(mesh.n_nodes)
    backends = kernels.available_backends()
    print(f"mesh: {mesh.n_nodes} nodes, {mesh.n_triangles} triangles; backends: {backends}")

    results = {}
    for name in backends:
        t_loc, loc = best_of(lambda: mesh._buckets.locate(pts, backend=name), args.repeat)
        t_rbf, conv = best_of(lambda: kernels.radial_convolve(
            mesh.nodes, mesh.nodes, weights, shape.coef, RBF_CAP, shape.cutoff, backend=name), args.repeat)
        results[name] = (loc, conv)
        print(f"{name:>7s}: locate {len(pts)} points {t_loc * 1e3:9.2f} ms | "
              f"rbf convolution {t_rbf * 1e3:9.2f} ms")

    if len(results) == 2:
        (tc, wc), cc = results["cython"]
        (tp, wp), cp = results["python"]
        assert np.array_equal(tc, tp)
        assert np.allclose(wc, wp, atol=1e-14)
        rel = np.max(np.abs(cc - cp)) / np.max(np.abs(cp))
        print(f"backends agree (max relative convolution difference {rel:.2e})")


if __name__ == "__main__":
    main()
