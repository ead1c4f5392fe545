"""Prescribed wind fields on a mesh.

The transport discretisation uses one constant velocity per element. Analytic
fields are defined through a stream function ``psi`` with ``v = (dpsi/dy,
-dpsi/dx)``; their element velocities are the exact curl of the P1
interpolant of ``psi``, which makes them divergence-free in the discrete sense
(normal flux continuous across every edge). Nodal values are kept for export.
"""
from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla

from .mesh import MeshError


@dataclasses.dataclass(frozen=True, eq=False)
class WindField:
    nodal: np.ndarray
    element_velocity: np.ndarray
    provenance: dict

    @property
    def max_speed(self):
        return float(np.max(np.linalg.norm(self.element_velocity, axis=1), initial=0.0))

    def check(self, mesh):
        if self.nodal.shape != (mesh.n_nodes, 2) or self.element_velocity.shape != (mesh.n_triangles, 2):
            raise MeshError("wind field does not match the mesh")
        if not (np.all(np.isfinite(self.nodal)) and np.all(np.isfinite(self.element_velocity))):
            raise ValueError("wind field contains non-finite values")


def discrete_divergence(mesh, wind):
    """Flux of the element wind against every P1 basis function,
    ``sum_E |E| grad(phi_j) . v_E``; zero in the interior for discretely
    divergence-free fields, and zero everywhere if also tangential."""
    g = mesh.shape_gradients
    flux = np.einsum("ekd,ed->ek", g, wind.element_velocity) * mesh.areas[:, None]
    return np.bincount(mesh.triangles.ravel(), weights=flux.ravel(), minlength=mesh.n_nodes)


def from_nodal(mesh, values, provenance=None):
    """Wind from nodal vectors; each element takes the value at its midpoint."""
    v = np.asarray(values, dtype=np.float64).reshape(mesh.n_nodes, 2)
    elem = v[mesh.triangles].mean(axis=1)
    return WindField(v.copy(), elem, dict(provenance or {"type": "nodal"}))


def _element_curl(mesh, psi_nodal):
    grad = np.einsum("ek,ekd->ed", psi_nodal[mesh.triangles], mesh.shape_gradients)
    return np.column_stack([grad[:, 1], -grad[:, 0]])


def _nodal_average(mesh, elem):
    w = np.repeat(mesh.areas, 3)
    num = np.zeros((mesh.n_nodes, 2))
    for d in range(2):
        num[:, d] = np.bincount(mesh.triangles.ravel(), weights=np.repeat(elem[:, d], 3) * w,
                                minlength=mesh.n_nodes)
    den = np.bincount(mesh.triangles.ravel(), weights=w, minlength=mesh.n_nodes)
    return num / den[:, None]


def from_stream_function(mesh, psi, velocity, provenance, fit_obstacles=False):
    """Build a wind from callables ``psi(x, y)`` and ``velocity(x, y) -> (vx, vy)``.

    With ``fit_obstacles`` the stream function is corrected by a discrete
    harmonic function so that it is constant along every hole boundary;
    the flow then passes around the buildings instead of through them.
    """
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    psi_h = np.asarray(psi(x, y), dtype=np.float64)
    if fit_obstacles and len(_hole_components(mesh)):
        psi_h = _fit_obstacles(mesh, psi_h)
        elem = _element_curl(mesh, psi_h)
        nodal = _nodal_average(mesh, elem)
        provenance = dict(provenance, fit_obstacles=True)
    else:
        elem = _element_curl(mesh, psi_h)
        vx, vy = velocity(x, y)
        nodal = np.column_stack([np.broadcast_to(vx, x.shape), np.broadcast_to(vy, x.shape)]).astype(float)
    return WindField(nodal, elem, dict(provenance))


def _hole_components(mesh):
    """Node sets of the boundary loops other than the outer one."""
    e = mesh.boundary_edges
    n = mesh.n_nodes
    g = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    _, labels = csgraph.connected_components(g, directed=False)
    bnodes = np.unique(e)
    outer = labels[bnodes[np.argmin(mesh.nodes[bnodes, 0])]]
    comps = []
    for lab in np.unique(labels[bnodes]):
        if lab != outer:
            comps.append(bnodes[labels[bnodes] == lab])
    return comps


def _fit_obstacles(mesh, psi_h):
    from .fem import assemble_stiffness

    target = np.zeros(mesh.n_nodes)
    fixed = np.zeros(mesh.n_nodes, dtype=bool)
    fixed[mesh.boundary_nodes] = True
    for comp in _hole_components(mesh):
        target[comp] = psi_h[comp].mean() - psi_h[comp]
    # correction vanishes on the outer boundary, lifts each hole to a constant
    K = assemble_stiffness(mesh).tocsr()
    free = ~fixed
    chi = target.copy()
    if free.any():
        rhs = -K[free][:, fixed] @ target[fixed]
        chi[free] = spla.spsolve(K[free][:, free].tocsc(), rhs)
    return psi_h + chi


def uniform(mesh, vx, vy, fit_obstacles=False):
    return from_stream_function(
        mesh,
        lambda x, y: vx * y - vy * x,
        lambda x, y: (np.full_like(x, vx), np.full_like(x, vy)),
        {"type": "uniform", "vx": vx, "vy": vy},
        fit_obstacles,
    )


def vortex(mesh, cx, cy, strength, width=None, fit_obstacles=False):
    """Gaussian vortex, ``psi = strength * exp(-|x - c|^2 / width^2)``.

    ``width`` defaults to a tenth of the shorter side of the mesh bounding
    box, so the field is tangential (to rounding) on the outer walls when the
    centre is well inside.
    """
    x0, y0, x1, y1 = mesh.bounds
    w = float(width) if width is not None else 0.1 * min(x1 - x0, y1 - y0)

    def psi(x, y):
        return strength * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / w**2)

    def vel(x, y):
        p = psi(x, y)
        return -2.0 * (y - cy) / w**2 * p, 2.0 * (x - cx) / w**2 * p

    return from_stream_function(
        mesh, psi, vel,
        {"type": "vortex", "cx": cx, "cy": cy, "strength": strength, "width": w},
        fit_obstacles,
    )


def double_gyre(mesh, strength=1.0, fit_obstacles=False):
    """Two counter-rotating cells side by side on the mesh bounding box,
    ``psi = strength * sin(2 pi xi) sin(pi eta)`` in unit box coordinates.

    ``psi`` vanishes on the outer walls, so the flow is tangential there,
    loosely mimicking a lid-driven cavity circulation.
    """
    x0, y0, x1, y1 = mesh.bounds
    lx, ly = x1 - x0, y1 - y0

    def psi(x, y):
        return strength * np.sin(2 * np.pi * (x - x0) / lx) * np.sin(np.pi * (y - y0) / ly)

    def vel(x, y):
        xi, eta = 2 * np.pi * (x - x0) / lx, np.pi * (y - y0) / ly
        return (strength * np.pi / ly * np.sin(xi) * np.cos(eta),
                -strength * 2 * np.pi / lx * np.cos(xi) * np.sin(eta))

    return from_stream_function(
        mesh, psi, vel, {"type": "double_gyre", "strength": strength}, fit_obstacles)


def zero(mesh):
    return from_nodal(mesh, np.zeros((mesh.n_nodes, 2)), {"type": "zero"})


def from_config(mesh, params, base_dir=None):
    """Wind from a config mapping such as ``{"type": "uniform", "vx": 1, "vy": 0}``."""
    params = dict(params)
    kind = params.pop("type", None)
    fit = bool(params.pop("fit_obstacles", False))
    if "file" in params:
        path = Path(params["file"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return read_wind(mesh, path)
    if kind == "uniform":
        return uniform(mesh, float(params["vx"]), float(params["vy"]), fit)
    if kind == "vortex":
        return vortex(mesh, float(params["cx"]), float(params["cy"]), float(params["strength"]),
                      params.get("width"), fit)
    if kind == "double_gyre":
        return double_gyre(mesh, float(params.get("strength", 1.0)), fit)
    if kind == "zero":
        return zero(mesh)
    raise ValueError(f"unknown wind type {kind!r}")


def read_wind(mesh, path):
    rows = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append(line.split())
    if not rows or rows[0] != ["windfield", "2"]:
        raise MeshError(f"{path}: expected header 'windfield 2'")
    if len(rows) < 2 or rows[1][0] != "nodes":
        raise MeshError(f"{path}: expected 'nodes N'")
    n = int(rows[1][1])
    if n != mesh.n_nodes or len(rows) - 2 < n:
        raise MeshError(f"{path}: {n} wind vectors for a mesh with {mesh.n_nodes} nodes")
    values = np.array([[float(a), float(b)] for a, b in rows[2:2 + n]])
    return from_nodal(mesh, values, {"type": "file", "path": str(path)})


def write_wind(wind, path):
    out = ["windfield 2", f"nodes {len(wind.nodal)}"]
    out += [f"{a!r} {b!r}" for a, b in wind.nodal.tolist()]
    Path(path).write_text("\n".join(out) + "\n")
