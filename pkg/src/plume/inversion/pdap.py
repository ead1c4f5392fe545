"""Primal-dual active point (PDAP) source identification.

Each iteration solves one adjoint problem for the current misfit, computes
the dual fields of the active source kinds, inserts the node maximizing each
dual field when it exceeds ``alpha + tol``, re-optimizes all intensities and
prunes atoms whose intensity dropped to zero. Observation columns of
inserted atoms are cached, so every location costs one forward solve.
"""
from __future__ import annotations

import dataclasses
import json
import threading
import time

import numpy as np

from ..sources import CONTINUOUS, INITIAL, KINDS, ShapeOperator, SparseMeasure, argmax_dual, dual_fields
from .postprocess import certify_optimality, merge_atoms, objective_value, prune
from .subproblem import SubproblemError, solve_intensities


class InversionError(RuntimeError):
    pass


@dataclasses.dataclass(frozen=True)
class PdapConfig:
    alpha: float
    sigma: float
    tol_abs: float = None
    max_iter: int = 50
    prune_rel: float = 1e-10
    merge_radius: float = 0.0
    gap_rel: float = 1e-10

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.tol_abs is None:
            object.__setattr__(self, "tol_abs", 1e-3 * self.alpha)
        if self.tol_abs < 0:
            raise ValueError("tol_abs must be nonnegative")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")
        if self.merge_radius < 0:
            raise ValueError("merge_radius must be nonnegative")


class ColumnCache:
    """Observation columns keyed by ``(kind, node)``; safe for concurrent inserts."""

    def __init__(self, compute):
        self._compute = compute
        self._data = {}
        self._lock = threading.Lock()

    def __contains__(self, key):
        return key in self._data

    def __len__(self):
        return len(self._data)

    def get(self, key):
        col = self._data.get(key)
        if col is None:
            col = self._compute(*key)
            with self._lock:
                col = self._data.setdefault(key, col)
        return col

    def matrix(self, keys, n_obs):
        if not keys:
            return np.zeros((n_obs, 0))
        return np.column_stack([self.get(k) for k in keys])


class SourceProblem:
    """Transport operator, sensor plan and per-kind shape models.

    ``shapes`` maps ``"initial"``/``"continuous"`` to a shape model; kinds
    mapped to ``None`` (or missing) are not identified.
    """

    def __init__(self, transport, plan, shapes, backend=None):
        self.transport = transport
        self.plan = plan
        self.mesh = transport.mesh
        self.shape_ops = {k: ShapeOperator(shapes[k], self.mesh, transport.mat, backend)
                          for k in KINDS if shapes.get(k) is not None}
        if not self.shape_ops:
            raise ValueError("at least one source kind must be active")
        self.columns = ColumnCache(self._column)

    @property
    def n_obs(self):
        return len(self.plan)

    @property
    def kinds(self):
        return tuple(self.shape_ops)

    def _column(self, kind, node):
        field = self.shape_ops[kind].field(self.mesh.nodes[node])
        if kind == INITIAL:
            return self.transport.parameter_to_observable(self.plan, m_I=field)
        return self.transport.parameter_to_observable(self.plan, m_C=field)

    def forward(self, mu_I=None, mu_C=None):
        """Observations of a pair of measures (atoms anywhere in the mesh)."""
        fields = {}
        for kind, mu in ((INITIAL, mu_I), (CONTINUOUS, mu_C)):
            if mu is not None and len(mu):
                fields[kind] = self.shape_ops[kind].measure_field(mu)
        if not fields:
            return np.zeros(self.n_obs)
        return self.transport.parameter_to_observable(self.plan, fields.get(INITIAL), fields.get(CONTINUOUS))

    def duals(self, misfit):
        """Dual fields ``(phi_I, phi_C)`` for the scaled misfit ``(forward(mu) - data) / sigma^2``."""
        if not np.any(misfit):
            zero = np.zeros(self.mesh.n_nodes)
            return (zero if INITIAL in self.shape_ops else None,
                    zero.copy() if CONTINUOUS in self.shape_ops else None)
        adj = self.transport.adjoint_solve(self.plan, misfit)
        return dual_fields(adj, self.shape_ops)

    def objective(self, mu_I, mu_C, data, sigma, alpha):
        """Objective of a pair of measures (one forward solve)."""
        r = self.forward(mu_I, mu_C) - data
        tv = sum(mu.total_variation for mu in (mu_I, mu_C) if mu is not None)
        return float(r @ r) / (2 * sigma**2) + alpha * tv


@dataclasses.dataclass
class InversionResult:
    mu_I: SparseMeasure
    mu_C: SparseMeasure
    post_processed: dict
    log: list
    counters: dict
    certificate: object
    status: str
    iterations: int
    timings: dict
    atoms: list = dataclasses.field(default_factory=list)

    @property
    def certified(self):
        return self.status == "certified"

    @property
    def objective_history(self):
        return np.array([entry["objective"] for entry in self.log])

    def to_dict(self):
        return {
            "status": self.status,
            "iterations": self.iterations,
            "mu_I": self.mu_I.to_dict(),
            "mu_C": self.mu_C.to_dict(),
            "post_processed": {k: v.to_dict() for k, v in self.post_processed.items()},
            "log": {key: [entry[key] for entry in self.log] for key in (self.log[0] if self.log else {})},
            "counters": dict(self.counters),
            "certificate": self.certificate.to_dict(),
            "timings": dict(self.timings),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _measures(problem, keys, lam):
    out = {}
    for kind in KINDS:
        idx = [i for i, k in enumerate(keys) if k[0] == kind]
        nodes = [keys[i][1] for i in idx]
        out[kind] = SparseMeasure(kind, problem.mesh.nodes[nodes].reshape(-1, 2), lam[idx])
    return out


def pdap_run(problem, data, cfg):
    """Identify sparse sources from the measurements ``data``.

    Parameters
    ----------
    problem : SourceProblem
    data : ndarray
        Observations ordered as ``problem.plan``.
    cfg : PdapConfig

    Returns
    -------
    InversionResult
        ``status`` is ``"certified"`` when the support condition holds,
        ``"gap"`` when the duality-gap surrogate fell below its threshold,
        ``"stagnated"`` when only already-active nodes were proposed and
        ``"max_iter"`` otherwise.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.shape != (problem.n_obs,):
        raise ValueError(f"data must have length {problem.n_obs}")
    if not np.all(np.isfinite(data)):
        raise InversionError("data contains non-finite values")
    tr = problem.transport
    fwd0, adj0 = tr.counts["forward"], tr.counts["adjoint"]
    ell0 = sum(op.solves for op in problem.shape_ops.values())
    timings = {"adjoint": 0.0, "columns": 0.0, "subproblem": 0.0}
    alpha, sigma, s2 = cfg.alpha, cfg.sigma, cfg.sigma**2

    keys = []
    lam = np.zeros(0)
    columns = np.zeros((problem.n_obs, 0))
    J0 = float(data @ data) / (2 * s2)
    J = J0
    tv_bound = J0 / alpha
    log = []
    status = "max_iter"
    new_candidates = 0
    iteration = 0
    while True:
        misfit = ((columns @ lam if lam.size else 0.0) - data) / s2
        t0 = time.perf_counter()
        phi = dict(zip((INITIAL, CONTINUOUS), problem.duals(misfit)))
        timings["adjoint"] += time.perf_counter() - t0
        best = {k: argmax_dual(phi[k], problem.mesh) for k in problem.kinds}
        log.append({
            "objective": J,
            "max_phi_I": best[INITIAL][2] if INITIAL in best else None,
            "max_phi_C": best[CONTINUOUS][2] if CONTINUOUS in best else None,
            "n_atoms_I": sum(1 for k in keys if k[0] == INITIAL),
            "n_atoms_C": sum(1 for k in keys if k[0] == CONTINUOUS),
        })
        top = max(b[2] for b in best.values())
        if top <= alpha + cfg.tol_abs:
            status = "certified"
            break
        if (top - alpha) * tv_bound <= cfg.gap_rel * J:
            status = "gap"
            break
        if iteration >= cfg.max_iter:
            break
        added = [(k, b[0]) for k, b in best.items() if b[2] > alpha + cfg.tol_abs and (k, b[0]) not in keys]
        if not added:
            status = "stagnated"
            break
        iteration += 1
        t0 = time.perf_counter()
        for key in added:
            new_candidates += key not in problem.columns
            keys.append(key)
        columns = problem.columns.matrix(keys, problem.n_obs)
        timings["columns"] += time.perf_counter() - t0
        t0 = time.perf_counter()
        warm = np.concatenate([lam, np.zeros(len(added))])
        try:
            lam = solve_intensities(columns, data, sigma, alpha, warm)
        except SubproblemError as exc:
            raise InversionError(f"iteration {iteration}: {exc}") from exc
        timings["subproblem"] += time.perf_counter() - t0
        if lam.size and lam.max() > 0:
            keep = lam >= cfg.prune_rel * lam.max()
        else:
            keep = np.zeros(len(lam), dtype=bool)
        keys = [k for k, flag in zip(keys, keep) if flag]
        lam = lam[keep]
        columns = columns[:, keep]
        J = objective_value(columns, lam, data, sigma, alpha)
        if not np.isfinite(J):
            raise InversionError(f"iteration {iteration}: non-finite objective")

    mus = _measures(problem, keys, lam)
    active = {kind: [k[1] for k in keys if k[0] == kind] for kind in KINDS}
    cert = certify_optimality(phi.get(INITIAL), phi.get(CONTINUOUS), alpha, active, cfg.tol_abs)
    post = {kind: merge_atoms(prune(mus[kind], cfg.prune_rel), cfg.merge_radius)
            for kind in problem.kinds}
    counters = {
        "forward_solves": tr.counts["forward"] - fwd0,
        "adjoint_solves": tr.counts["adjoint"] - adj0,
        "elliptic_solves": sum(op.solves for op in problem.shape_ops.values()) - ell0,
        "new_candidates": new_candidates,
    }
    return InversionResult(mus[INITIAL], mus[CONTINUOUS], post, log, counters, cert, status,
                           iteration, timings, atoms=list(zip(keys, lam.tolist())))
