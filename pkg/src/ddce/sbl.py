"""Sparse Bayesian learning EM loop over a measurement model.

gamma holds per-point prior variances, lam the noise variance. The E step
computes the exact posterior moments, the M step the evidence fixed-point
updates; iteration stops when the posterior mean stops moving.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

__all__ = ["SBLState", "sbl_e_step", "sbl_m_step", "sbl_run"]

LAM_FLOOR = 1e-12
PRUNE_REL = 1e-12


@dataclass
class SBLState:
    """EM state; sigma is the full posterior covariance."""

    gamma: np.ndarray
    lam: float
    mu: np.ndarray
    sigma: np.ndarray
    iters: int = 0
    converged: bool = False


def _solve_pd(c, rhs):
    """Solve c x = rhs for Hermitian positive definite c, retrying once with
    diagonal loading if the factorization degenerates."""
    try:
        out = cho_solve(cho_factor(c, lower=True), rhs)
        if np.all(np.isfinite(out)):
            return out
    except (np.linalg.LinAlgError, ValueError):
        pass
    load = 1e-12 * max(1.0, float(np.abs(np.diag(c)).max()))
    return cho_solve(cho_factor(c + load * np.eye(c.shape[0]), lower=True), rhs)


def sbl_e_step(model, state):
    """Posterior moments for the current (gamma, lam)."""
    phi = model.phi
    b = phi * state.gamma[None, :]
    c = state.lam * np.eye(phi.shape[0], dtype=complex) + b @ phi.conj().T
    w = _solve_pd(c, b)
    sigma = np.diag(state.gamma).astype(complex) - b.conj().T @ w
    sigma = 0.5 * (sigma + sigma.conj().T)
    mu = sigma @ (phi.conj().T @ model.y_t) / state.lam
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
        raise ValueError("posterior update produced non-finite values")
    return mu, sigma


def sbl_m_step(model, state):
    """Variance and noise updates from the current posterior moments.

    Guarded fixed points: a direction with sigma_ii = gamma_i (no data
    shrinkage) keeps its gamma; gamma_i = 0 stays 0 and contributes 0 to the
    noise denominator; a nonpositive noise denominator keeps the previous
    lam; lam never drops below the floor.
    """
    g_old = state.gamma
    sdiag = np.clip(state.sigma.diagonal().real, 0.0, None)
    ratio = np.divide(sdiag, g_old, out=np.zeros_like(sdiag), where=g_old > 0)
    shrink = 1.0 - ratio
    gamma = g_old.copy()
    ok = (g_old > 0) & (shrink > 1e-12)
    gamma[ok] = np.abs(state.mu[ok]) ** 2 / shrink[ok]
    resid = model.y_t - model.phi @ state.mu
    lam_den = model.phi.shape[0] - g_old.size + float(ratio.sum())
    lam = state.lam if lam_den <= 0 else float(np.vdot(resid, resid).real) / lam_den
    return gamma, max(lam, LAM_FLOOR)


def sbl_run(model, max_iters=500, tol=1e-3):
    """Alternate E and M steps until the posterior mean moves less than tol.

    Initialization: gamma = 1, lam = ||y||^2 / (100 X). Variances below
    1e-12 of the peak are pruned to exact zero at loop exit only.
    """
    x_len, g_len = model.phi.shape
    lam0 = max(float(np.vdot(model.y_t, model.y_t).real) / (100.0 * x_len), LAM_FLOOR)
    state = SBLState(gamma=np.ones(g_len), lam=lam0,
                     mu=np.zeros(g_len, dtype=complex),
                     sigma=np.zeros((g_len, g_len), dtype=complex))
    for it in range(1, max_iters + 1):
        mu, sigma = sbl_e_step(model, state)
        delta = float(np.linalg.norm(mu - state.mu))
        state.mu, state.sigma, state.iters = mu, sigma, it
        state.gamma, state.lam = sbl_m_step(model, state)
        if delta < tol:
            state.converged = True
            break
    peak = float(state.gamma.max()) if g_len else 0.0
    if peak > 0.0:
        state.gamma[state.gamma < PRUNE_REL * peak] = 0.0
    return state
