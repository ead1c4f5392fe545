"""Source shape models, sparse measures and the dual (pre-dual) fields."""
from __future__ import annotations

import dataclasses
import json
import math

import numpy as np

from .fem import LinearSystem, barycentric_loads
from .kernels import radial_convolve
from .mesh import locate_points

INITIAL = "initial"
CONTINUOUS = "continuous"
KINDS = (INITIAL, CONTINUOUS)

RBF_CAP = 0.5
RBF_TRUNCATION = 1e-12


# ---------------------------------------------------------------- measures

@dataclasses.dataclass(frozen=True, eq=False)
class SparseMeasure:
    """Finite conic combination of point masses."""

    kind: str
    locations: np.ndarray
    intensities: np.ndarray

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        loc = np.asarray(self.locations, dtype=np.float64).reshape(-1, 2)
        lam = np.asarray(self.intensities, dtype=np.float64).ravel()
        if len(loc) != len(lam):
            raise ValueError("one intensity per location required")
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise ValueError("intensities must be finite and nonnegative")
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "intensities", lam)

    @classmethod
    def empty(cls, kind=INITIAL):
        return cls(kind, np.zeros((0, 2)), np.zeros(0))

    @classmethod
    def from_atoms(cls, kind, atoms):
        """``atoms`` is an iterable of ``(x, y, intensity)``."""
        atoms = list(atoms)
        if not atoms:
            return cls.empty(kind)
        arr = np.asarray(atoms, dtype=np.float64).reshape(-1, 3)
        return cls(kind, arr[:, :2], arr[:, 2])

    def __len__(self):
        return len(self.intensities)

    @property
    def total_variation(self):
        return float(self.intensities.sum())

    def to_dict(self):
        return {
            "kind": self.kind,
            "atoms": [{"x": float(x), "y": float(y), "intensity": float(lam)}
                      for (x, y), lam in zip(self.locations, self.intensities)],
        }

    @classmethod
    def from_dict(cls, data):
        atoms = [(a["x"], a["y"], a["intensity"]) for a in data.get("atoms", [])]
        return cls.from_atoms(data["kind"], atoms)

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------- shape models

@dataclasses.dataclass(frozen=True)
class RBF:
    """Capped Gaussian blob, equal to ``eps`` at distance ``r`` from the centre.

    ``growing=True`` flips the exponent sign, giving a profile that grows
    away from the centre until it reaches the cap.
    """

    r: float
    eps: float = 0.01
    growing: bool = False

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("RBF radius must be positive")
        if not 0 < self.eps < 1:
            raise ValueError("RBF threshold eps must lie in (0, 1)")

    @property
    def coef(self):
        c = math.log(self.eps) / self.r**2
        return -c if self.growing else c

    @property
    def cutoff(self):
        """Distance beyond which the profile is below ``1e-12 * cap``."""
        if self.coef >= 0:
            return math.inf
        return math.sqrt(math.log(RBF_TRUNCATION * RBF_CAP) / self.coef)


@dataclasses.dataclass(frozen=True)
class Elliptic:
    """Kernel of ``(eta - gamma Laplace)`` with Robin condition ``gamma dm/dn + beta m = 0``."""

    eta: float
    gamma: float
    beta: float = None

    def __post_init__(self):
        if not (self.eta > 0 and self.gamma > 0):
            raise ValueError("eta and gamma must be positive")
        if self.beta is None:
            object.__setattr__(self, "beta", math.sqrt(self.eta * self.gamma) / 1.42)
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")


@dataclasses.dataclass(frozen=True)
class Dirac:
    pass


def shape_from_dict(data):
    data = dict(data)
    kind = data.pop("type")
    if kind == "rbf":
        return RBF(float(data["r"]), float(data.get("eps", 0.01)), bool(data.get("growing", False)))
    if kind == "elliptic":
        beta = data.get("beta")
        return Elliptic(float(data["eta"]), float(data["gamma"]), None if beta is None else float(beta))
    if kind == "dirac":
        return Dirac()
    raise ValueError(f"unknown shape model {kind!r}")


def shape_to_dict(shape):
    if isinstance(shape, RBF):
        return {"type": "rbf", "r": shape.r, "eps": shape.eps, "growing": shape.growing}
    if isinstance(shape, Elliptic):
        return {"type": "elliptic", "eta": shape.eta, "gamma": shape.gamma, "beta": shape.beta}
    return {"type": "dirac"}


def rbf_profile(d2, shape):
    with np.errstate(over="ignore"):
        return np.minimum(RBF_CAP, np.exp(shape.coef * np.asarray(d2)))


def eval_rbf(x_s, r, eps, mesh, growing=False):
    """Nodal interpolant of the capped radial blob centred at ``x_s``."""
    shape = RBF(r, eps, growing)
    d2 = np.sum((mesh.nodes - np.asarray(x_s, dtype=np.float64)) ** 2, axis=1)
    return rbf_profile(d2, shape)


def elliptic_system(shape, matrices):
    return LinearSystem(shape.eta * matrices.M + shape.gamma * matrices.K + shape.beta * matrices.B)


def eval_elliptic(x_s, eta, gamma, beta, mesh, matrices, system=None):
    """Solve ``(eta M + gamma K + beta B) m = b`` with ``b`` the barycentric load of ``x_s``."""
    shape = Elliptic(eta, gamma, beta)
    system = system or elliptic_system(shape, matrices)
    b = np.asarray(barycentric_loads(mesh, [x_s]).todense()).ravel()
    return system.solve(b)


class ShapeOperator:
    """A shape model bound to a mesh: atom fields and dual fields.

    ``dual(load)`` returns the nodal field ``phi`` with
    ``phi(x_k) = -<load, field(x_k)>`` for every node ``x_k``, i.e. the
    negated pre-dual applied to a misfit whose adjoint gradient is ``load``.
    """

    def __init__(self, shape, mesh, matrices, backend=None):
        self.shape = shape
        self.mesh = mesh
        self.mat = matrices
        self.backend = backend
        self.solves = 0
        self._system = elliptic_system(shape, matrices) if isinstance(shape, Elliptic) else None

    def fields(self, locations, intensities=None):
        """``sum_i lambda_i * shape(x_i)`` (or the single-atom fields as columns
        of a matrix when ``intensities`` is None)."""
        locs = np.asarray(locations, dtype=np.float64).reshape(-1, 2)
        locate_points(self.mesh, locs)
        if isinstance(self.shape, RBF):
            d2 = np.sum((self.mesh.nodes[:, None, :] - locs[None, :, :]) ** 2, axis=2)
            cols = rbf_profile(d2, self.shape)
        else:
            loads = barycentric_loads(self.mesh, locs).T.toarray()
            system = self._system if self._system is not None else self.mat.mass_system
            cols = np.column_stack([system.solve(b) for b in loads.T]) if len(locs) else np.zeros((self.mesh.n_nodes, 0))
            self.solves += len(locs) if self._system is not None else 0
        if intensities is None:
            return cols
        return cols @ np.asarray(intensities, dtype=np.float64)

    def field(self, x):
        return self.fields([x])[:, 0]

    def measure_field(self, measure):
        if len(measure) == 0:
            return np.zeros(self.mesh.n_nodes)
        return self.fields(measure.locations, measure.intensities)

    def dual(self, load):
        load = np.asarray(load, dtype=np.float64)
        if isinstance(self.shape, Dirac):
            return -self.mat.mass_system.solve(load)
        if isinstance(self.shape, Elliptic):
            self.solves += 1
            return -self._system.solve(load)
        nodes = self.mesh.nodes
        return -radial_convolve(nodes, nodes, load, self.shape.coef, RBF_CAP, self.shape.cutoff,
                                backend=self.backend)


def measure_to_fields(mu_I, mu_C, shapes, mesh, matrices):
    """Nodal ``(m_I, m_C)`` of a pair of measures; ``shapes`` maps kind -> shape."""
    out = []
    for mu, kind in ((mu_I, INITIAL), (mu_C, CONTINUOUS)):
        if mu is None or len(mu) == 0:
            out.append(np.zeros(mesh.n_nodes))
        else:
            out.append(ShapeOperator(shapes[kind], mesh, matrices).measure_field(mu))
    return tuple(out)


def dual_fields(adjoint, shape_ops):
    """``(phi_I, phi_C)`` from an adjoint trajectory; ``shape_ops`` maps kind ->
    :class:`ShapeOperator` (a missing kind yields ``None``)."""
    phi_I = shape_ops[INITIAL].dual(adjoint.initial_load) if shape_ops.get(INITIAL) else None
    phi_C = shape_ops[CONTINUOUS].dual(adjoint.continuous_load) if shape_ops.get(CONTINUOUS) else None
    return phi_I, phi_C


def argmax_dual(phi, mesh):
    """Global nodal maximum ``(node, location, value)``; ties go to the lowest node."""
    phi = np.asarray(phi)
    k = int(np.argmax(phi))
    return k, mesh.nodes[k].copy(), float(phi[k])
