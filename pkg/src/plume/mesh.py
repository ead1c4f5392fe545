"""Two-dimensional triangular meshes: generation, I/O, point location and
boundary classification against a wind field."""
from __future__ import annotations

import dataclasses
import enum
from functools import cached_property
from pathlib import Path

import numpy as np

from .kernels import TriangleBuckets


class MeshError(ValueError):
    pass


class PointNotFoundError(LookupError):
    """Raised when a query point lies outside the meshed region."""

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = list(indices)


class BoundaryKind(enum.IntEnum):
    INNER = 0
    INFLOW = 1
    OUTFLOW = 2

    @property
    def label(self):
        return self.name.lower()

    @classmethod
    def from_label(cls, label):
        try:
            return cls[label.strip().upper()]
        except KeyError:
            raise MeshError(f"unknown boundary marker {label!r}") from None


@dataclasses.dataclass(frozen=True)
class BaryLocation:
    tri_index: int
    weights: np.ndarray
    nodes: np.ndarray

    def interpolate(self, values):
        return float(np.dot(self.weights, np.asarray(values)[self.nodes]))


@dataclasses.dataclass(frozen=True, eq=False)
class TriMesh:
    """Immutable P1 mesh.

    Attributes
    ----------
    nodes : (N, 2) float array
    triangles : (M, 3) int array, counter-clockwise
    boundary_edges : (B, 2) int array, oriented so the mesh lies on the left
    boundary_markers : (B,) int array of :class:`BoundaryKind` values
    holes : rectangles ``(x0, y0, x1, y1)`` removed by the generator (metadata)
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_markers: np.ndarray
    holes: tuple = ()

    def __post_init__(self):
        for name in ("nodes", "triangles", "boundary_edges", "boundary_markers"):
            arr = getattr(self, name)
            arr.setflags(write=False)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @cached_property
    def signed_areas(self):
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def areas(self):
        return np.abs(self.signed_areas)

    @cached_property
    def elem_diameter(self):
        p = self.nodes[self.triangles]
        d01 = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
        d12 = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
        d20 = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
        return np.maximum(np.maximum(d01, d12), d20)

    @cached_property
    def shape_gradients(self):
        """Constant gradients of the three P1 basis functions, shape (M, 3, 2)."""
        p = self.nodes[self.triangles]
        x, y = p[..., 0], p[..., 1]
        g = np.empty((self.n_triangles, 3, 2))
        for k in range(3):
            i, j = (k + 1) % 3, (k + 2) % 3
            g[:, k, 0] = y[:, i] - y[:, j]
            g[:, k, 1] = x[:, j] - x[:, i]
        g /= (2.0 * self.signed_areas)[:, None, None]
        return g

    @cached_property
    def boundary_tri(self):
        """Index of the triangle owning each boundary edge."""
        key = _edge_keys(self.triangles)
        lookup = {k: t for k, t in zip(map(tuple, key[0]), key[1])}
        edges = np.sort(self.boundary_edges, axis=1)
        return np.array([lookup[(a, b)] for a, b in edges], dtype=np.int64)

    @cached_property
    def boundary_lengths(self):
        d = self.nodes[self.boundary_edges[:, 1]] - self.nodes[self.boundary_edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @cached_property
    def boundary_normals(self):
        """Outward unit normals of the boundary edges."""
        d = self.nodes[self.boundary_edges[:, 1]] - self.nodes[self.boundary_edges[:, 0]]
        n = np.column_stack([d[:, 1], -d[:, 0]])
        return n / self.boundary_lengths[:, None]

    @property
    def boundary_nodes(self):
        return np.unique(self.boundary_edges)

    @property
    def dirichlet_nodes(self):
        """Nodes on inflow edges, where the concentration is fixed to zero."""
        inflow = self.boundary_edges[self.boundary_markers == BoundaryKind.INFLOW]
        return np.unique(inflow)

    @cached_property
    def h_max(self):
        return float(self.elem_diameter.max())

    @cached_property
    def bounds(self):
        lo = self.nodes.min(axis=0)
        hi = self.nodes.max(axis=0)
        return (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))

    @cached_property
    def _buckets(self):
        return TriangleBuckets(self.nodes, self.triangles)

    @cached_property
    def node_neighbors(self):
        """CSR adjacency ``(indptr, indices)`` of the mesh graph."""
        import scipy.sparse as sp

        t = self.triangles
        rows = np.concatenate([t[:, 0], t[:, 1], t[:, 2], t[:, 1], t[:, 2], t[:, 0]])
        cols = np.concatenate([t[:, 1], t[:, 2], t[:, 0], t[:, 0], t[:, 1], t[:, 2]])
        g = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(self.n_nodes,) * 2)
        g.sum_duplicates()
        return g.indptr, g.indices

    def with_markers(self, markers):
        markers = np.asarray(markers, dtype=np.int64).copy()
        if markers.shape != (len(self.boundary_edges),):
            raise MeshError("one marker per boundary edge required")
        return dataclasses.replace(self, boundary_markers=markers)

    def locate(self, points, tol=1e-12, backend=None):
        """Vectorised point location; returns ``(tri, weights)`` with tri = -1
        for points outside the mesh."""
        return self._buckets.locate(points, tol=tol, backend=backend)

    def contains(self, points):
        tri, _ = self.locate(points)
        return tri >= 0

    def check(self):
        """Raise :class:`MeshError` if a structural invariant is violated."""
        if self.triangles.min(initial=0) < 0 or self.triangles.max(initial=0) >= self.n_nodes:
            raise MeshError("triangle node index out of range")
        if np.any(self.signed_areas <= 0):
            raise MeshError("triangles must have positive signed area")
        keys, _, counts = _edge_keys(self.triangles, with_counts=True)
        if np.any(counts > 2):
            raise MeshError("edge shared by more than two triangles")
        bnd = {tuple(k) for k, c in zip(keys, counts) if c == 1}
        given = {tuple(e) for e in np.sort(self.boundary_edges, axis=1)}
        if bnd != given:
            raise MeshError("boundary edges do not match the triangulation")
        if len(self.boundary_markers) != len(self.boundary_edges):
            raise MeshError("one marker per boundary edge required")


def _edge_keys(triangles, with_counts=False):
    t = np.asarray(triangles)
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    owner = np.tile(np.arange(len(t)), 3)
    key = np.sort(e, axis=1)
    if not with_counts:
        return key, owner
    uniq, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    return uniq, inv, counts


def find_boundary_edges(triangles):
    """Edges used by exactly one triangle, in that triangle's orientation."""
    t = np.asarray(triangles)
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    key = np.sort(e, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    once = counts[inv] == 1
    idx = np.flatnonzero(once)
    # deterministic order: by owning triangle, then local edge
    owner = idx % len(t)
    local = idx // len(t)
    order = np.lexsort((local, owner))
    return e[idx[order]].astype(np.int64)


def from_arrays(nodes, triangles, boundary=None, holes=()):
    """Build a :class:`TriMesh`, orienting triangles counter-clockwise.

    ``boundary`` is an optional ``(edges, markers)`` pair; edges are matched
    against the detected boundary regardless of their orientation.
    """
    nodes = np.array(nodes, dtype=np.float64).reshape(-1, 2)
    tris = np.array(triangles, dtype=np.int64).reshape(-1, 3)
    if len(tris) == 0:
        raise MeshError("mesh has no triangles")
    if tris.min() < 0 or tris.max() >= len(nodes):
        raise MeshError("triangle node index out of range")
    p = nodes[tris]
    area2 = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - \
            (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    if np.any(area2 == 0):
        raise MeshError("degenerate triangle")
    flip = area2 < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    edges = find_boundary_edges(tris)
    markers = np.zeros(len(edges), dtype=np.int64)
    if boundary is not None:
        b_edges, b_markers = boundary
        lookup = {tuple(sorted(map(int, e))): int(m) for e, m in zip(b_edges, b_markers)}
        try:
            markers = np.array([lookup[tuple(sorted(e))] for e in edges.tolist()], dtype=np.int64)
        except KeyError as exc:
            raise MeshError(f"boundary section misses edge {exc.args[0]}") from None
        if len(lookup) != len(edges):
            raise MeshError("boundary section lists edges that are not on the boundary")
    mesh = TriMesh(nodes, tris, edges, markers, tuple(holes))
    mesh.check()
    return mesh


def build_rect_mesh(bounds, nx, ny, holes=()):
    """Structured mesh of a rectangle with rectangular holes.

    Each grid cell is split into two triangles along alternating diagonals
    (a "union jack" pattern, symmetric under reflection for even ``nx``,
    ``ny``). Hole edges are snapped to the nearest grid line and every cell
    inside a hole is dropped.

    Parameters
    ----------
    bounds : (x0, y0, x1, y1)
    nx, ny : int
        Cells per direction, at least 2.
    holes : sequence of (x0, y0, x1, y1)
        Rectangles strictly inside ``bounds``.
    """
    x0, y0, x1, y1 = map(float, bounds)
    if int(nx) != nx or int(ny) != ny or nx < 2 or ny < 2:
        raise MeshError("nx and ny must be integers >= 2")
    if not (x1 > x0 and y1 > y0):
        raise MeshError("empty bounds")
    nx, ny = int(nx), int(ny)
    hx, hy = (x1 - x0) / nx, (y1 - y0) / ny

    keep = np.ones((nx, ny), dtype=bool)
    snapped = []
    for hole in holes:
        a0, b0, a1, b1 = map(float, hole)
        if not (x0 < a0 < a1 < x1 and y0 < b0 < b1 < y1):
            raise MeshError(f"hole {tuple(hole)} is not strictly inside the bounds")
        i0, i1 = int(round((a0 - x0) / hx)), int(round((a1 - x0) / hx))
        j0, j1 = int(round((b0 - y0) / hy)), int(round((b1 - y0) / hy))
        if i1 <= i0 or j1 <= j0:
            raise MeshError(f"hole {tuple(hole)} is thinner than one grid cell")
        if not keep[i0:i1, j0:j1].all():
            raise MeshError(f"hole {tuple(hole)} overlaps another hole")
        keep[i0:i1, j0:j1] = False
        snapped.append((x0 + i0 * hx, y0 + j0 * hy, x0 + i1 * hx, y0 + j1 * hy))
    if not keep.any():
        raise MeshError("holes cover the whole domain")

    def nid(i, j):
        return j * (nx + 1) + i

    ci, cj = np.nonzero(keep)
    n00, n10 = nid(ci, cj), nid(ci + 1, cj)
    n01, n11 = nid(ci, cj + 1), nid(ci + 1, cj + 1)
    even = (ci + cj) % 2 == 0
    t_a = np.where(even[:, None], np.column_stack([n00, n10, n11]), np.column_stack([n00, n10, n01]))
    t_b = np.where(even[:, None], np.column_stack([n00, n11, n01]), np.column_stack([n10, n11, n01]))
    tris = np.empty((2 * len(ci), 3), dtype=np.int64)
    tris[0::2] = t_a
    tris[1::2] = t_b

    gx, gy = np.meshgrid(x0 + hx * np.arange(nx + 1), y0 + hy * np.arange(ny + 1))
    nodes = np.column_stack([gx.ravel(), gy.ravel()])
    nodes[:, 0][np.isclose(nodes[:, 0], x1)] = x1
    nodes[:, 1][np.isclose(nodes[:, 1], y1)] = y1
    used = np.unique(tris)
    remap = np.full(len(nodes), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return from_arrays(nodes[used], remap[tris], holes=snapped)


def locate_point(mesh, x):
    """Containing triangle and barycentric weights of a single point.

    Points on shared edges resolve to the lowest triangle index.
    """
    tri, w = mesh.locate(np.asarray(x, dtype=np.float64).reshape(1, 2))
    if tri[0] < 0:
        raise PointNotFoundError(f"point {tuple(np.ravel(x))} is outside the mesh", [0])
    t = int(tri[0])
    return BaryLocation(t, w[0], mesh.triangles[t].copy())


def locate_points(mesh, points):
    """Vectorised :func:`locate_point`; returns ``(tri, weights)`` arrays."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    tri, w = mesh.locate(pts)
    bad = np.flatnonzero(tri < 0)
    if len(bad):
        shown = ", ".join(str(tuple(pts[i])) for i in bad[:5])
        raise PointNotFoundError(f"{len(bad)} point(s) outside the mesh: {shown}", bad)
    return tri, w


def classify_boundary(mesh, wind, tol_n=1e-10):
    """Mark each boundary edge inflow, outflow or inner from the sign of v.n.

    The wind is taken at the edge midpoint, i.e. the constant velocity of the
    owning element.
    """
    v = wind.element_velocity[mesh.boundary_tri]
    vn = np.einsum("ij,ij->i", v, mesh.boundary_normals)
    vmax = float(np.max(np.linalg.norm(wind.element_velocity, axis=1), initial=0.0))
    thr = tol_n * vmax
    markers = np.full(len(vn), BoundaryKind.INNER, dtype=np.int64)
    markers[vn > thr] = BoundaryKind.OUTFLOW
    markers[vn < -thr] = BoundaryKind.INFLOW
    return markers


# ---------------------------------------------------------------- file format

def _data_lines(path):
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line.split()


def read_mesh(path):
    lines = _data_lines(path)
    try:
        head = next(lines)
        if head != ["trimesh", "2"]:
            raise MeshError(f"{path}: expected header 'trimesh 2'")
        tag, n = next(lines)
        if tag != "nodes":
            raise MeshError(f"{path}: expected 'nodes N'")
        nodes = [tuple(map(float, next(lines))) for _ in range(int(n))]
        tag, m = next(lines)
        if tag != "triangles":
            raise MeshError(f"{path}: expected 'triangles M'")
        tris = [tuple(map(int, next(lines))) for _ in range(int(m))]
        boundary = None
        rest = next(lines, None)
        if rest is not None:
            if rest[0] != "boundary":
                raise MeshError(f"{path}: unexpected section {rest[0]!r}")
            rows = [next(lines) for _ in range(int(rest[1]))]
            edges = [(int(a), int(b)) for a, b, _ in rows]
            markers = [BoundaryKind.from_label(k) for _, _, k in rows]
            boundary = (edges, markers)
    except (StopIteration, ValueError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"{path}: malformed mesh file ({exc})") from None
    return from_arrays(nodes, tris, boundary)


def write_mesh(mesh, path):
    out = ["trimesh 2", f"nodes {mesh.n_nodes}"]
    out += [f"{x!r} {y!r}" for x, y in mesh.nodes.tolist()]
    out.append(f"triangles {mesh.n_triangles}")
    out += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    out.append(f"boundary {len(mesh.boundary_edges)}")
    out += [f"{a} {b} {BoundaryKind(m).label}"
            for (a, b), m in zip(mesh.boundary_edges.tolist(), mesh.boundary_markers.tolist())]
    Path(path).write_text("\n".join(out) + "\n")
