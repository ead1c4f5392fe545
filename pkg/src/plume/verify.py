"""Numerical self-checks: adjoint duality and mass conservation."""
from __future__ import annotations

import numpy as np

from . import mesh as meshmod
from . import wind as windmod
from .sources import eval_rbf
from .transport import SensorPlan, TransportConfig, TransportOperator

DUALITY_HOLES = [[0.25, 0.15, 0.5, 0.4], [0.6, 0.6, 0.75, 0.85]]


def duality_operator(n=48, stabilization=True):
    """Transport on an ``n`` by ``n`` two-building mesh (about 2k nodes for
    ``n = 48``) with a uniform oblique wind, so that inflow Dirichlet nodes,
    SUPG terms and obstacles are all exercised."""
    m = meshmod.build_rect_mesh((0.0, 0.0, 1.0, 1.0), n, n, DUALITY_HOLES)
    w = windmod.uniform(m, 0.8, 0.3)
    m = m.with_markers(meshmod.classify_boundary(m, w))
    return TransportOperator(m, w, TransportConfig(0.001, 0.02, 50, stabilization))


def duality_check(transport=None, n_trials=20, seed=0, n_sensors=12, n_times=17):
    """Relative duality errors over random parameters, data and sensors.

    For every trial compares ``<F(m_I, 0), y>`` with ``<m_I, M p0>`` and
    ``<F(0, m_C), y>`` with ``<m_C, M q>``, where ``p0`` and ``q`` are the
    nodal representers returned by the transport operator. Sample times are
    drawn off the time grid to exercise the interpolation in time.

    Returns
    -------
    ndarray, shape (n_trials, 2)
        Relative errors for the initial and continuous source terms.
    """
    tr = transport or duality_operator()
    rng = np.random.default_rng(seed)
    x0, y0, x1, y1 = tr.mesh.bounds
    errs = np.empty((n_trials, 2))
    for k in range(n_trials):
        pts = []
        while len(pts) < n_sensors:
            p = rng.uniform((x0, y0), (x1, y1))
            if tr.mesh.contains(p[None])[0]:
                pts.append(p)
        times = np.sort(rng.uniform(0.0, tr.cfg.T, n_times))
        times[times <= 0] = tr.cfg.dt
        plan = SensorPlan.static(np.array(pts), times)
        m_I = rng.standard_normal(tr.n_nodes)
        m_C = rng.standard_normal(tr.n_nodes)
        y = rng.standard_normal(len(plan))
        adj = tr.adjoint_solve(plan, y)
        mass = tr.mat.M
        lhs_I = tr.parameter_to_observable(plan, m_I=m_I) @ y
        rhs_I = m_I @ (mass @ tr.initial_dual(adj))
        lhs_C = tr.parameter_to_observable(plan, m_C=m_C) @ y
        rhs_C = m_C @ (mass @ tr.adjoint_continuous_dual(adj))
        errs[k] = (abs(lhs_I - rhs_I) / max(abs(lhs_I), 1e-300),
                   abs(lhs_C - rhs_C) / max(abs(lhs_C), 1e-300))
    return errs


def conservation_check(n=32, n_steps=100, dt=0.02, kappa=0.001, strength=0.01):
    """Relative drift of the total mass ``1^T M u[n]`` without stabilization.

    Uses a Gaussian vortex centred in the unit square, whose velocity is
    tangential on the walls, so there is no inflow and no flux through the
    boundary.

    Returns
    -------
    ndarray
        ``|mass[n] - mass[0]| / |mass[0]|`` for every step.
    """
    m = meshmod.build_rect_mesh((0.0, 0.0, 1.0, 1.0), n, n)
    w = windmod.vortex(m, 0.5, 0.5, strength)
    m = m.with_markers(meshmod.classify_boundary(m, w))
    if len(m.dirichlet_nodes):
        raise RuntimeError("vortex wind produced inflow edges")
    tr = TransportOperator(m, w, TransportConfig(kappa, dt, n_steps, stabilization=False))
    u0 = eval_rbf((0.4, 0.55), 0.15, 0.01, m)
    traj = tr.forward_solve(u0)
    mass = traj.states @ tr.total_mass_weights
    return np.abs(mass - mass[0]) / abs(mass[0])
