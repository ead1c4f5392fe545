"""Nonnegative l1-regularized least squares for the atom intensities.

Minimizes ``f(lam) = ||columns lam - data||^2 / (2 sigma^2) + alpha * sum(lam)`` over
``lam >= 0`` by a primal-dual active-set (semismooth Newton) iteration on the
fixed-point residual ``lam - max(0, lam - theta * (grad + alpha))``.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla


class SubproblemError(RuntimeError):
    """Raised when the intensity solve does not reach the KKT tolerance.

    ``iterate`` holds the last iterate.
    """

    def __init__(self, message, iterate):
        super().__init__(message)
        self.iterate = iterate


def _quadratic(columns, data, sigma, alpha):
    s2 = sigma**2
    H = columns.T @ columns / s2
    c = alpha - columns.T @ data / s2
    scale = max(alpha, float(np.max(np.abs(columns.T @ data), initial=0.0)) / s2)
    return H, c, scale


def kkt_violation(lam, grad):
    """Largest violation of the KKT conditions given ``grad = H lam + c``.

    Free entries (``lam > 0``) need ``grad == 0``; bound entries need
    ``grad >= 0``.
    """
    if len(lam) == 0:
        return 0.0
    pos = lam > 0
    viol = np.where(pos, np.abs(grad), np.maximum(-grad, 0.0))
    return float(viol.max())


def _objective(lam, H, c):
    return 0.5 * lam @ H @ lam + c @ lam


def _projected_gradient(lam, H, c, tol, max_iter=20000):
    """Accelerated projected gradient with adaptive restart."""
    L = float(np.linalg.eigvalsh(H)[-1]) if len(lam) else 0.0
    if L <= 0:
        return np.maximum(lam, 0.0)
    x = lam.copy()
    z = x.copy()
    t = 1.0
    for _ in range(max_iter):
        x_new = np.maximum(z - (H @ z + c) / L, 0.0)
        if kkt_violation(x_new, H @ x_new + c) <= tol:
            return x_new
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        if _objective(x_new, H, c) > _objective(x, H, c):
            z, t = x.copy(), 1.0
            continue
        z = x_new + (t - 1) / t_new * (x_new - x)
        x, t = x_new, t_new
    return x


def solve_intensities(columns, data, sigma, alpha, warmstart=None, tol=1e-9, max_iter=200):
    """Minimize ``||columns lam - data||^2 / (2 sigma^2) + alpha |lam|_1`` subject to ``lam >= 0``.

    Parameters
    ----------
    columns : ndarray, shape (n_obs, n_atoms)
        Observation columns of the candidate atoms.
    data : ndarray, shape (n_obs,)
        Data.
    sigma, alpha : float
        Noise scale and regularization weight.
    warmstart : ndarray, optional
        Feasible starting intensities (defaults to zero).
    tol : float
        Relative KKT tolerance; the absolute tolerance is
        ``tol * max(alpha, ||columns^T data||_inf / sigma^2)``.

    Returns
    -------
    lam : ndarray
        Optimal nonnegative intensities.

    Raises
    ------
    SubproblemError
        If the KKT tolerance is not met; carries the last iterate.
    """
    columns = np.asarray(columns, dtype=np.float64)
    data = np.asarray(data, dtype=np.float64)
    n = columns.shape[1]
    if n == 0:
        return np.zeros(0)
    H, c, scale = _quadratic(columns, data, sigma, alpha)
    atol = tol * scale
    lam = np.zeros(n) if warmstart is None else np.maximum(np.asarray(warmstart, dtype=np.float64), 0.0)
    theta = 1.0 / max(float(np.max(np.diag(H))), np.finfo(float).tiny)
    f = _objective(lam, H, c)
    fallbacks = 0
    for _ in range(max_iter):
        grad = H @ lam + c
        if kkt_violation(lam, grad) <= atol:
            return lam
        free = (lam - theta * grad) > 0
        target = np.zeros(n)
        step_ok = False
        if free.any():
            try:
                cf = sla.cho_factor(H[np.ix_(free, free)])
                target[free] = sla.cho_solve(cf, -c[free])
                step_ok = np.all(np.isfinite(target))
            except (np.linalg.LinAlgError, ValueError):
                step_ok = False
        else:
            step_ok = True
        if step_ok:
            direction = target - lam
            t = 1.0
            for _ in range(21):
                trial = np.maximum(lam + t * direction, 0.0)
                f_trial = _objective(trial, H, c)
                if f_trial <= f + 1e-14 * max(abs(f), 1.0):
                    break
                t *= 0.5
            else:
                step_ok = False
        if not step_ok:
            fallbacks += 1
            if fallbacks > 3:
                break
            trial = _projected_gradient(lam, H, c, atol)
            f_trial = _objective(trial, H, c)
        if np.array_equal(trial, lam) and step_ok:
            # Newton made no progress; let projected gradient take over once
            trial = _projected_gradient(lam, H, c, atol)
            f_trial = _objective(trial, H, c)
            fallbacks += 1
            if fallbacks > 3:
                lam = trial
                break
        lam, f = trial, f_trial
    grad = H @ lam + c
    viol = kkt_violation(lam, grad)
    if viol <= atol:
        return lam
    raise SubproblemError(f"intensity subproblem did not converge (KKT violation {viol:.3e} > {atol:.3e})", lam)


def closed_form_single(column, data, sigma, alpha):
    """Optimal intensity for one column, ``max(0, (column.data/s2 - alpha) / (column.column/s2))``."""
    s2 = sigma**2
    gg = float(column @ column) / s2
    if gg == 0:
        return 0.0
    return max(0.0, (float(column @ data) / s2 - alpha) / gg)
