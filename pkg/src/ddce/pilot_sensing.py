"""Pilot embedding, estimation-region extraction, and the sensing model.

The received region rows stack Doppler-innermost into y_T, and each
candidate (delay, Doppler) point contributes one separable measurement
column, so y_T = Phi h + noise over any dictionary grid of points.
"""

from dataclasses import dataclass

import numpy as np

from .dd_core import DDFrame, eval_effective_pulse, periodic_dirichlet

__all__ = [
    "VirtualGrid",
    "MeasurementModel",
    "embed_pilot",
    "extract_region",
    "phi_column",
    "phi_columns",
    "build_virtual_grid",
    "build_measurement_matrix",
    "estimate_P_hat",
]


@dataclass
class VirtualGrid:
    """Mutable dictionary grid over the estimation region.

    Point i starts at (l_bar, k_bar) = (floor(i / N_nu) r_tau,
    (i mod N_nu) r_nu - kmax); adjustment moves points off this lattice but
    always keeps them inside [0, D] x [-kmax, kmax].
    """

    l_bar: np.ndarray
    k_bar: np.ndarray
    m_tau: int
    n_nu: int
    r_tau: float
    r_nu: float

    @property
    def size(self):
        return self.l_bar.size

    def copy(self):
        return VirtualGrid(self.l_bar.copy(), self.k_bar.copy(),
                           self.m_tau, self.n_nu, self.r_tau, self.r_nu)


@dataclass
class MeasurementModel:
    """Sensing instance y_T = Phi h + noise over the current grid.

    Column i of phi always reflects grid point i; r_y = y_t y_t^H when an
    observation is attached.
    """

    y_t: np.ndarray
    phi: np.ndarray
    d0: float
    r_y: np.ndarray
    grid: VirtualGrid
    params: object


def embed_pilot(data, params):
    """Place the pilot at (l0, k0) and zero the guard block around it;
    data outside the guard block is untouched."""
    params.check_pilot_region()
    if data.grid.shape != (params.M, params.N):
        raise ValueError("frame does not match params")
    g = data.grid.copy()
    g[params.l0 - params.D: params.l0 + params.D + 1,
      params.k0 - 2 * params.kmax: params.k0 + 2 * params.kmax + 1] = 0.0
    g[params.l0, params.k0] = params.pilot_amplitude
    return DDFrame(g)


def extract_region(Y, params):
    """Doppler-innermost vector of the (D+1) x (2 kmax + 1) region."""
    params.check_pilot_region()
    if Y.grid.shape != (params.M, params.N):
        raise ValueError("frame does not match params")
    block = Y.grid[params.l0: params.l0 + params.D + 1,
                   params.k0 - params.kmax: params.k0 + params.kmax + 1]
    return block.reshape(-1).copy()


def phi_columns(l, k, params):
    """Measurement columns for arrays of candidate points, one per point.

    Row (l_g, k_g) of the column at (l, k), with l_g, k_g absolute frame
    indices inside the region, reads
    g((l_g - l0 - l) Ts) e^{j 2 pi l_g k / (M N)} (d0 / N)
    (1 - e^{j 2 pi (k0 + k - k_g)}) / (1 - e^{j (2 pi / N)(k0 + k - k_g)}).
    """
    params.check_pilot_region()
    l = np.atleast_1d(np.asarray(l, dtype=float))
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if l.shape != k.shape:
        raise ValueError("l and k must have matching lengths")
    if np.any(l < 0.0) or np.any(l > params.D) or np.any(np.abs(k) > params.kmax):
        raise ValueError("candidate point outside the estimation region")
    mn = params.frame_len
    d_rel = np.arange(params.D + 1)  # l_g - l0
    k_abs = params.k0 - params.kmax + np.arange(params.n_t)
    g_part = eval_effective_pulse((d_rel[:, None] - l[None, :]) * params.ts, params)
    phase = np.exp(2j * np.pi * (params.l0 + d_rel)[:, None] * k[None, :] / mn)
    dirich = params.pilot_amplitude * periodic_dirichlet(
        params.k0 + k[None, :] - k_abs[:, None], params.N)
    cols = np.einsum("mj,nj->mnj", g_part * phase, dirich)
    return cols.reshape(params.region_size, l.size)


def phi_column(l, k, params):
    """Single measurement column at the candidate point (l, k)."""
    return phi_columns(l, k, params)[:, 0]


def build_virtual_grid(m_tau, n_nu, params):
    """Uniform m_tau x n_nu dictionary grid spanning the region."""
    if m_tau < 2 or n_nu < 2:
        raise ValueError("grid needs at least 2 points per dimension")
    r_tau = params.D / (m_tau - 1)
    r_nu = 2.0 * params.kmax / (n_nu - 1)
    l_bar = np.repeat(np.arange(m_tau) * r_tau, n_nu)
    k_bar = np.tile(np.arange(n_nu) * r_nu - params.kmax, m_tau)
    return VirtualGrid(l_bar, k_bar, m_tau, n_nu, r_tau, r_nu)


def build_measurement_matrix(grid, params, y_t=None):
    """Assemble Phi for the grid, optionally coupled with an observation."""
    phi = phi_columns(grid.l_bar, grid.k_bar, params)
    r_y = None
    if y_t is not None:
        y_t = np.asarray(y_t, dtype=complex)
        if y_t.size != params.region_size:
            raise ValueError("observation length does not match the region")
        r_y = np.outer(y_t, y_t.conj())
    return MeasurementModel(y_t, phi, params.pilot_amplitude, r_y, grid, params)


def estimate_P_hat(params, grid):
    """Compressed-sensing estimate of the number of recoverable paths."""
    return int(np.floor(params.region_size / np.log(grid.size)))
