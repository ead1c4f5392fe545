"""Implicit-Euler SUPG transport, its exact discrete adjoint and the
space-time observation operator.

Forward step (Dirichlet rows eliminated)::

    (M + dt V + dt kappa K + dt S_tau + Vt_tau) u[n+1] = (M + Vt_tau)(u[n] + dt m_C)

The adjoint is the transpose of this recursion composed with the observation
operator, so ``<F(m_I, m_C), y> = <m_I, initial_load> + <m_C, continuous_load>``
holds to rounding error.
"""
from __future__ import annotations

import collections
import csv
import dataclasses
from functools import cached_property

import numpy as np

from .fem import LinearSystem, apply_dirichlet, assemble_all, barycentric_loads


class TransportError(RuntimeError):
    pass


@dataclasses.dataclass(frozen=True)
class TransportConfig:
    kappa: float
    dt: float
    n_steps: int
    stabilization: bool = True

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError("n_steps must be a positive integer")

    @property
    def T(self):
        return self.dt * self.n_steps

    @property
    def times(self):
        return self.dt * np.arange(self.n_steps + 1)


@dataclasses.dataclass(frozen=True, eq=False)
class SensorPlan:
    """Observation points ``(times[i], points[i])``.

    ``sensor_ids`` groups observations that belong to the same physical sensor
    (for export only).
    """

    times: np.ndarray
    points: np.ndarray
    sensor_ids: np.ndarray = None
    noise_sigma: float = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64).ravel()
        p = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if len(t) != len(p):
            raise ValueError("one point per observation time required")
        if np.any(t <= 0) or not np.all(np.isfinite(t)):
            raise ValueError("observation times must be positive")
        ids = np.zeros(len(t), dtype=np.int64) if self.sensor_ids is None else np.asarray(self.sensor_ids, dtype=np.int64)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "sensor_ids", ids)

    def __len__(self):
        return len(self.times)

    @classmethod
    def static(cls, points, times, noise_sigma=None):
        """Every sensor in ``points`` sampled at every time in ``times``."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        t = np.asarray(times, dtype=np.float64).ravel()
        tt, ss = np.meshgrid(t, np.arange(len(pts)), indexing="ij")
        return cls(tt.ravel(), pts[ss.ravel()], ss.ravel(), noise_sigma)


@dataclasses.dataclass(frozen=True, eq=False)
class StateTrajectory:
    times: np.ndarray
    states: np.ndarray  # (n_steps + 1, n_nodes)

    def at(self, step):
        return self.states[step]


@dataclasses.dataclass(frozen=True, eq=False)
class AdjointTrajectory(StateTrajectory):
    """Backward states ``p[n]`` (``p[n_steps] = 0``) and the two dual loads.

    ``initial_load`` is the gradient of ``<observations, y>`` with respect to
    the nodal initial condition; ``continuous_load`` the same for the nodal
    source term. Both are load vectors (M-weighted).
    """

    initial_load: np.ndarray = None
    continuous_load: np.ndarray = None


class ObservationOperator:
    """Barycentric interpolation in space, linear interpolation in time."""

    def __init__(self, mesh, plan, cfg):
        t = plan.times
        if np.any(t < 0) or np.any(t > cfg.T * (1 + 1e-12)):
            raise ValueError(f"observation times must lie in [0, {cfg.T}]")
        uniq, inv = np.unique(plan.points, axis=0, return_inverse=True)
        self.loc_index = inv.ravel()
        self.loads = barycentric_loads(mesh, uniq)  # (L, n_nodes)
        s = t / cfg.dt
        n = np.floor(s).astype(np.int64)
        theta = s - n
        up = theta > 1 - 1e-9
        n[up] += 1
        theta[up] = 0.0
        theta[theta < 1e-9] = 0.0
        at_end = n >= cfg.n_steps
        n[at_end] = cfg.n_steps
        theta[at_end] = 0.0
        self.step = n
        self.theta = theta
        self.n_steps = cfg.n_steps
        self.n_obs = len(t)

    def apply_series(self, series):
        """Observations from per-step location values ``series`` (n_steps+1, L)."""
        lo = series[self.step, self.loc_index]
        nxt = np.minimum(self.step + 1, self.n_steps)
        hi = series[nxt, self.loc_index]
        return (1.0 - self.theta) * lo + self.theta * hi

    def step_weights(self, misfit):
        """Transpose of :meth:`apply_series`: (n_steps+1, L) weights."""
        misfit = np.asarray(misfit, dtype=np.float64)
        if misfit.shape != (self.n_obs,):
            raise ValueError(f"misfit must have length {self.n_obs}")
        weights = np.zeros((self.n_steps + 1, self.loads.shape[0]))
        np.add.at(weights, (self.step, self.loc_index), (1.0 - self.theta) * misfit)
        nxt = np.minimum(self.step + 1, self.n_steps)
        np.add.at(weights, (nxt, self.loc_index), self.theta * misfit)
        return weights


class TransportOperator:
    """Forward/adjoint transport on a fixed mesh, wind and time grid.

    The time-step matrix is factorized once; forward and adjoint marches reuse
    the factors (the adjoint through transposed solves). ``counts`` records
    the number of forward and adjoint marches performed.
    """

    def __init__(self, mesh, wind, cfg, matrices=None):
        self.mesh = mesh
        self.wind = wind
        self.cfg = cfg
        self.mat = matrices if matrices is not None else assemble_all(mesh, wind, cfg.kappa, cfg.stabilization)
        m = self.mat
        dt = cfg.dt
        A = m.M + dt * m.V + dt * cfg.kappa * m.K + dt * m.S_tau + m.Vt_tau
        self.C = (m.M + m.Vt_tau).tocsr()
        self.CT = self.C.T.tocsr()
        self.dirichlet = mesh.dirichlet_nodes
        self.system = LinearSystem(apply_dirichlet(A, self.dirichlet))
        self.counts = collections.Counter()
        self._obs_cache = {}

    @property
    def n_nodes(self):
        return self.mesh.n_nodes

    @property
    def mass(self):
        return self.mat.mass_system

    def observation_operator(self, plan):
        key = id(plan)
        entry = self._obs_cache.get(key)
        if entry is None or entry[0] is not plan:
            entry = (plan, ObservationOperator(self.mesh, plan, self.cfg))
            self._obs_cache[key] = entry
        return entry[1]

    def _vector(self, v):
        if v is None:
            return np.zeros(self.n_nodes)
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.n_nodes,):
            raise ValueError(f"nodal vector of length {self.n_nodes} expected, got {v.shape}")
        return v

    def _march(self, m_I, m_C, visit):
        cfg = self.cfg
        u = self._vector(m_I).copy()
        src = cfg.dt * (self.C @ self._vector(m_C))
        has_src = bool(np.any(src))
        visit(0, u)
        for n in range(cfg.n_steps):
            rhs = self.C @ u
            if has_src:
                rhs += src
            rhs[self.dirichlet] = 0.0
            u = self.system.solve(rhs)
            if not np.all(np.isfinite(u)):
                raise TransportError(f"non-finite state at step {n + 1}")
            visit(n + 1, u)
        self.counts["forward"] += 1

    def forward_solve(self, m_I=None, m_C=None):
        states = np.empty((self.cfg.n_steps + 1, self.n_nodes))

        def store(n, u):
            states[n] = u

        self._march(m_I, m_C, store)
        return StateTrajectory(self.cfg.times, states)

    def observe(self, traj, plan):
        op = self.observation_operator(plan)
        series = (op.loads @ traj.states.T).T
        return op.apply_series(series)

    def parameter_to_observable(self, plan, m_I=None, m_C=None):
        """Observations of the forward solution without storing the states."""
        op = self.observation_operator(plan)
        series = np.empty((self.cfg.n_steps + 1, op.loads.shape[0]))

        def record(n, u):
            series[n] = op.loads @ u

        self._march(m_I, m_C, record)
        return op.apply_series(series)

    def adjoint_solve(self, plan, misfit):
        misfit = np.asarray(misfit, dtype=np.float64)
        if not np.all(np.isfinite(misfit)):
            raise TransportError("misfit contains non-finite values")
        op = self.observation_operator(plan)
        weights = op.step_weights(misfit)
        N = self.cfg.n_steps
        p = np.zeros((N + 1, self.n_nodes))
        for n in range(N - 1, -1, -1):
            rhs = self.CT @ p[n + 1] + op.loads.T @ weights[n + 1]
            rhs[self.dirichlet] = 0.0
            p[n] = self.system.solve(rhs, transpose=True)
            if not np.all(np.isfinite(p[n])):
                raise TransportError(f"non-finite adjoint state at step {n}")
        initial = self.CT @ p[0] + op.loads.T @ weights[0]
        continuous = self.cfg.dt * (self.CT @ p[:N].sum(axis=0))
        self.counts["adjoint"] += 1
        return AdjointTrajectory(self.cfg.times, p, initial, continuous)

    def initial_dual(self, adj):
        """Nodal representer ``M^{-1} initial_load`` (the adjoint at time zero
        in the discrete L2 sense): ``<F(m_I, 0), y> = <m_I, M p0>``."""
        return self.mass.solve(adj.initial_load)

    def adjoint_continuous_dual(self, adj):
        """Nodal representer of the source-term gradient:
        ``<F(0, m_C), y> = <m_C, M dual>``."""
        return self.mass.solve(adj.continuous_load)

    @cached_property
    def total_mass_weights(self):
        return np.asarray(self.mat.M.sum(axis=0)).ravel()


def export_trajectory_csv(traj, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "time", "node", "value"])
        for n, (t, u) in enumerate(zip(traj.times, traj.states)):
            for k, val in enumerate(u):
                w.writerow([n, repr(float(t)), k, repr(float(val))])


def export_series_csv(plan, values, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sensor_id", "t", "value"])
        for sid, t, val in zip(plan.sensor_ids, plan.times, values):
            w.writerow([int(sid), repr(float(t)), repr(float(val))])
