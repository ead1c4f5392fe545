"""P1 finite-element matrices and sparse direct solves.

Conventions: ``V[i, j] = int phi_i (v . grad phi_j)``; the SUPG pieces carry the
element parameter ``tau_E`` inside the element sums. Element wind is the
constant ``wind.element_velocity[E]`` (one-point midpoint rule).
"""
from __future__ import annotations

import dataclasses

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import locate_points

_LOCAL_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


class SingularMatrixError(np.linalg.LinAlgError):
    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = list(indices)


def _scatter(mesh, local, n=None):
    """Sum per-element (M, 3, 3) blocks into a CSR matrix."""
    n = mesh.n_nodes if n is None else n
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.eliminate_zeros()
    return A


def assemble_mass(mesh):
    local = mesh.areas[:, None, None] * _LOCAL_MASS[None]
    return _scatter(mesh, local)


def assemble_boundary_mass(mesh):
    """``B[i, j] = int_{boundary} phi_i phi_j``."""
    e = mesh.boundary_edges
    L = mesh.boundary_lengths
    rows = np.concatenate([e[:, 0], e[:, 1], e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 0], e[:, 1], e[:, 1], e[:, 0]])
    vals = np.concatenate([L / 3.0, L / 3.0, L / 6.0, L / 6.0])
    B = sp.coo_matrix((vals, (rows, cols)), shape=(mesh.n_nodes,) * 2).tocsr()
    B.sum_duplicates()
    return B


def assemble_stiffness(mesh, boundary_robin=None):
    """Stiffness matrix, plus ``boundary_robin * B`` when a Robin coefficient is given."""
    g = mesh.shape_gradients
    local = mesh.areas[:, None, None] * np.einsum("eid,ejd->eij", g, g)
    K = _scatter(mesh, local)
    if boundary_robin:
        K = (K + boundary_robin * assemble_boundary_mass(mesh)).tocsr()
    return K


def _check_wind(mesh, wind):
    if wind.element_velocity.shape != (mesh.n_triangles, 2):
        raise ValueError("wind field does not belong to this mesh")


def assemble_advection(mesh, wind):
    _check_wind(mesh, wind)
    g = mesh.shape_gradients
    vg = np.einsum("ejd,ed->ej", g, wind.element_velocity)
    # int_E phi_i = |E| / 3, independent of i
    local = (mesh.areas / 3.0)[:, None, None] * np.broadcast_to(vg[:, None, :], (mesh.n_triangles, 3, 3))
    return _scatter(mesh, local)


def supg_tau(h, kappa, speed):
    """``min(h^2 / (2 kappa), h / |v|)``; zero speed uses the diffusive branch."""
    h = np.asarray(h, dtype=np.float64)
    speed = np.asarray(speed, dtype=np.float64)
    diff = h**2 / (2.0 * kappa)
    with np.errstate(divide="ignore"):
        adv = np.where(speed > 0, h / np.where(speed > 0, speed, 1.0), np.inf)
    return np.minimum(diff, adv)


def assemble_supg(mesh, wind, kappa):
    """Return ``(S_tau, Vt_tau)``.

    ``S_tau[i, j] = sum_E tau_E int_E (v . grad phi_i)(v . grad phi_j)`` and
    ``Vt_tau[i, j] = sum_E tau_E int_E phi_j (v . grad phi_i)``. The second
    derivative part of the residual vanishes for linear elements.
    """
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    _check_wind(mesh, wind)
    v = wind.element_velocity
    tau = supg_tau(mesh.elem_diameter, kappa, np.linalg.norm(v, axis=1))
    vg = np.einsum("ejd,ed->ej", mesh.shape_gradients, v)
    w = tau * mesh.areas
    S = _scatter(mesh, w[:, None, None] * vg[:, :, None] * vg[:, None, :])
    Vt = _scatter(mesh, (w / 3.0)[:, None, None] * np.broadcast_to(vg[:, :, None], (mesh.n_triangles, 3, 3)))
    return S, Vt


def barycentric_loads(mesh, points):
    """Sparse (n_points, n_nodes) matrix whose rows hold barycentric weights."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    tri, w = locate_points(mesh, pts)
    rows = np.repeat(np.arange(len(pts)), 3)
    cols = mesh.triangles[tri].ravel()
    P = sp.coo_matrix((w.ravel(), (rows, cols)), shape=(len(pts), mesh.n_nodes)).tocsr()
    P.sum_duplicates()
    return P


def barycentric_load(mesh, x):
    return np.asarray(barycentric_loads(mesh, [x]).todense()).ravel()


def discrete_dirac(mesh, M, x):
    """Nodal vector ``M^{-1} sum_j a_j e_{l_j}`` of a point source at ``x``.

    ``M`` may be a matrix or a :class:`LinearSystem` (whose factorization is
    then reused).
    """
    system = M if isinstance(M, LinearSystem) else LinearSystem(M)
    return system.solve(barycentric_load(mesh, x))


def apply_dirichlet(A, nodes):
    """Replace the rows and columns of ``nodes`` by those of the identity."""
    A = sp.csr_matrix(A, copy=True)
    nodes = np.asarray(nodes, dtype=np.int64)
    if len(nodes) == 0:
        return A
    keep = np.ones(A.shape[0])
    keep[nodes] = 0.0
    D = sp.diags(keep)
    out = (D @ A @ D + sp.diags(1.0 - keep)).tocsr()
    out.sum_duplicates()
    out.eliminate_zeros()
    return out


class LinearSystem:
    """A square sparse matrix with a lazily computed, cached LU factorization.

    Repeated solves (time stepping, transposed adjoint solves) reuse the same
    factors. The object is read-only after construction.
    """

    def __init__(self, A):
        A = sp.csc_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"matrix must be square, got {A.shape}")
        A.sum_duplicates()
        self.matrix = A
        self._lu = None

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def factor(self):
        if self._lu is None:
            self._lu = self._factorize()
        return self._lu

    def _factorize(self):
        A = self.matrix
        zero_rows = np.flatnonzero(np.diff(A.tocsr().indptr) == 0)
        zero_cols = np.flatnonzero(np.diff(A.indptr) == 0)
        if len(zero_rows) or len(zero_cols):
            raise SingularMatrixError(
                f"matrix is singular: empty rows {zero_rows[:10].tolist()}, "
                f"empty columns {zero_cols[:10].tolist()}",
                sorted(set(zero_rows.tolist()) | set(zero_cols.tolist())))
        try:
            return spla.splu(A)
        except RuntimeError as exc:
            diag = np.abs(A.diagonal())
            suspects = np.flatnonzero(diag == 0)[:10].tolist()
            raise SingularMatrixError(f"factorization failed ({exc}); zero diagonal at {suspects}",
                                      suspects) from None

    def solve(self, b, transpose=False, check=False):
        b = np.asarray(b, dtype=np.float64)
        x = self.factor.solve(b, trans="T" if transpose else "N")
        if check:
            A = self.matrix.T if transpose else self.matrix
            r = np.linalg.norm(A @ x - b)
            nb = np.linalg.norm(b)
            if nb > 0 and r > 1e-10 * nb:
                raise SingularMatrixError(f"solve residual {r / nb:.3e} exceeds 1e-10 (ill-conditioned system)")
        return x


def factorize_and_solve(A, b, check=True):
    """Solve ``A x = b``. ``A`` may be a :class:`LinearSystem`, whose cached
    factorization is used, or a plain sparse/dense matrix."""
    system = A if isinstance(A, LinearSystem) else LinearSystem(A)
    return system.solve(b, check=check)


@dataclasses.dataclass(frozen=True, eq=False)
class FEMatrices:
    """All matrices of the transport problem on one mesh/wind/kappa."""

    M: sp.csr_matrix
    K: sp.csr_matrix
    V: sp.csr_matrix
    B: sp.csr_matrix
    S_tau: sp.csr_matrix
    Vt_tau: sp.csr_matrix
    kappa: float

    @property
    def mass_system(self):
        sys = self.__dict__.get("_mass_system")
        if sys is None:
            sys = LinearSystem(self.M)
            object.__setattr__(self, "_mass_system", sys)
        return sys


def assemble_all(mesh, wind, kappa, stabilization=True):
    M = assemble_mass(mesh)
    K = assemble_stiffness(mesh)
    V = assemble_advection(mesh, wind)
    B = assemble_boundary_mass(mesh)
    if stabilization:
        S, Vt = assemble_supg(mesh, wind, kappa)
    else:
        if not kappa > 0:
            raise ValueError("kappa must be positive")
        S = sp.csr_matrix(M.shape)
        Vt = sp.csr_matrix(M.shape)
    return FEMatrices(M, K, V, B, S, Vt, float(kappa))
