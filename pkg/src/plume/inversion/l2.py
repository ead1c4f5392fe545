"""Quadratic (Tikhonov) reconstruction of the initial condition.

Minimizes ``||forward(m) - data||^2 / (2 sigma^2) + (m - m_prior)^T R (m - m_prior) / 2``
with ``R = A M^{-1} A`` and ``A = eta M + gamma K + beta B`` by conjugate
gradients preconditioned with ``R^{-1}``. Every Hessian application costs one
forward and one adjoint transport solve.
"""
from __future__ import annotations

import dataclasses

import numpy as np

from ..sources import Elliptic, elliptic_system


@dataclasses.dataclass
class L2Result:
    m: np.ndarray
    converged: bool
    iterations: int
    residuals: list
    quadratic: list
    counters: dict

    @property
    def pde_solves(self):
        return self.counters["forward_solves"] + self.counters["adjoint_solves"]


def l2_invert(transport, plan, data, prior, sigma, cg_tol=1e-6, cg_max=200):
    """Tikhonov estimate of the initial condition (no continuous source).

    Parameters
    ----------
    transport : TransportOperator
    plan : SensorPlan
    data : ndarray
        Data ordered as ``plan``.
    prior : tuple
        ``(m_prior, eta, gamma, beta)``; ``m_prior`` may be None (zero) and
        ``beta`` None for the default Robin coefficient.
    sigma : float
        Noise scale; ``np.inf`` switches the data term off.
    cg_tol : float
        Relative reduction of the preconditioned residual norm.
    cg_max : int
        Iteration cap; on exhaustion the result is returned with
        ``converged=False``.

    Returns
    -------
    L2Result
        Estimate, convergence flag, residual and quadratic-model histories
        and the number of transport solves spent.
    """
    m_prior, eta, gamma, beta = prior
    n = transport.n_nodes
    mp = np.zeros(n) if m_prior is None else np.asarray(m_prior, dtype=np.float64)
    shape = Elliptic(eta, gamma, beta)
    A = elliptic_system(shape, transport.mat)
    Amat = A.matrix
    mass = transport.mass
    w = 0.0 if np.isinf(sigma) else 1.0 / sigma**2
    fwd0, adj0 = transport.counts["forward"], transport.counts["adjoint"]
    data = np.asarray(data, dtype=np.float64)

    def prior_op(v):
        return Amat @ mass.solve(Amat @ v)

    def precond(r):
        return A.solve(mass.matrix @ A.solve(r))

    def data_gradient(m):
        """``adjoint(forward(m) - data) / sigma^2`` in nodal (Euclidean) coordinates."""
        misfit = (transport.parameter_to_observable(plan, m_I=m) if np.any(m) else 0.0) - data
        return w * transport.adjoint_solve(plan, misfit).initial_load

    def hess_data(v):
        return w * transport.adjoint_solve(plan, transport.parameter_to_observable(plan, m_I=v)).initial_load

    x = mp.copy()
    r = np.zeros(n) if w == 0.0 else -data_gradient(x)
    z = precond(r)
    rz = float(r @ z)
    r0 = np.sqrt(max(rz, 0.0))
    residuals = [r0]
    quadratic = [0.0]
    p = z.copy()
    converged = r0 == 0.0
    it = 0
    # quadratic model relative to the prior: q(x) = 0.5 e^T H e - r0^T e, e = x - mp
    g0 = r.copy()
    while not converged and it < cg_max:
        Hp = (hess_data(p) if w else 0.0) + prior_op(p)
        pHp = float(p @ Hp)
        if pHp <= 0:
            break
        step = rz / pHp
        x = x + step * p
        r = r - step * Hp
        it += 1
        e = x - mp
        quadratic.append(-0.5 * float(e @ (g0 + r)))
        z = precond(r)
        rz_new = float(r @ z)
        residuals.append(np.sqrt(max(rz_new, 0.0)))
        if residuals[-1] <= cg_tol * r0:
            converged = True
            break
        p = z + (rz_new / rz) * p
        rz = rz_new
    counters = {
        "forward_solves": transport.counts["forward"] - fwd0,
        "adjoint_solves": transport.counts["adjoint"] - adj0,
    }
    return L2Result(x, bool(converged), it, residuals, quadratic, counters)
