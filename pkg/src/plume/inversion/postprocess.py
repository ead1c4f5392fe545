"""Pruning, atom merging, optimality certificates and objective evaluation."""
from __future__ import annotations

import dataclasses

import numpy as np

from ..sources import SparseMeasure


def prune(mu, prune_rel=1e-10):
    """Drop atoms with intensity below ``prune_rel * max intensity``."""
    if len(mu) == 0:
        return mu
    top = mu.intensities.max()
    if top <= 0:
        return SparseMeasure.empty(mu.kind)
    keep = mu.intensities >= prune_rel * top
    return SparseMeasure(mu.kind, mu.locations[keep], mu.intensities[keep])


def merge_atoms(mu, merge_radius):
    """Greedy clustering of nearby atoms.

    Atoms are visited by decreasing intensity; each unassigned atom opens a
    cluster that absorbs every unassigned atom within ``merge_radius`` of it.
    A cluster becomes a single atom at the intensity-weighted centroid that
    carries the summed intensity, so the total variation is unchanged.
    """
    if merge_radius < 0:
        raise ValueError("merge radius must be nonnegative")
    if len(mu) <= 1 or merge_radius == 0:
        return mu
    order = np.argsort(-mu.intensities, kind="stable")
    taken = np.zeros(len(mu), dtype=bool)
    locs, lams = [], []
    for i in order:
        if taken[i]:
            continue
        dist = np.linalg.norm(mu.locations - mu.locations[i], axis=1)
        members = np.flatnonzero(~taken & (dist <= merge_radius))
        taken[members] = True
        w = mu.intensities[members]
        total = w.sum()
        if total > 0:
            locs.append(w @ mu.locations[members] / total)
        else:
            locs.append(mu.locations[i])
        lams.append(total)
    return SparseMeasure(mu.kind, np.array(locs), np.array(lams))


@dataclasses.dataclass
class Certificate:
    """Evaluated support condition.

    ``global_slack`` is ``max phi - alpha`` over both kinds; ``atom_slack``
    lists ``alpha - phi(x_i)`` for the active atoms of each kind.
    """

    alpha: float
    tol: float
    max_phi: dict
    atom_slack: dict

    @property
    def global_slack(self):
        vals = [v - self.alpha for v in self.max_phi.values() if v is not None]
        return max(vals) if vals else -self.alpha

    @property
    def certified(self):
        return self.global_slack <= self.tol

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "tol": self.tol,
            "certified": bool(self.certified),
            "global_slack": float(self.global_slack),
            "max_phi": {k: (None if v is None else float(v)) for k, v in self.max_phi.items()},
            "atom_slack": {k: [float(s) for s in v] for k, v in self.atom_slack.items()},
        }


def certify_optimality(phi_I, phi_C, alpha, active=None, tol=None):
    """Check ``max phi <= alpha + tol`` for each active kind.

    ``active`` maps a kind to the node indices of its atoms; ``tol`` defaults
    to ``1e-3 * alpha``.
    """
    tol = 1e-3 * alpha if tol is None else tol
    active = active or {}
    max_phi, atom_slack = {}, {}
    for kind, phi in (("initial", phi_I), ("continuous", phi_C)):
        if phi is None:
            continue
        phi = np.asarray(phi)
        max_phi[kind] = float(phi.max()) if phi.size else 0.0
        nodes = np.asarray(active.get(kind, []), dtype=np.int64)
        atom_slack[kind] = (alpha - phi[nodes]).tolist()
    return Certificate(float(alpha), float(tol), max_phi, atom_slack)


def objective_value(columns, lam, data, sigma, alpha):
    """``||columns lam - data||^2 / (2 sigma^2) + alpha * sum(lam)``."""
    lam = np.asarray(lam, dtype=np.float64)
    r = (columns @ lam if lam.size else 0.0) - data
    return float(r @ r) / (2 * sigma**2) + alpha * float(lam.sum())
