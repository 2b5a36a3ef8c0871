"""ODDM transmit/receive chain and the doubly selective channel.

Two equivalent channel paths are provided: a sample-level time-domain
simulation (modulate, apply_channel_time, demodulate) and the dense
DD-domain operator H acting directly on vectorized frames. Both resolve
lags d = 0..D with the effective pulse at the fractional path delays, so
they agree to floating-point precision.
"""

from dataclasses import dataclass

import numpy as np

from .dd_core import (
    DDFrame,
    devectorize,
    eval_effective_pulse,
    periodic_dirichlet,
    validate_paths,
    vectorize_frame,
)

__all__ = [
    "DDChannelOperator",
    "modulate",
    "demodulate",
    "apply_channel_time",
    "build_H_DD",
    "apply_H_DD",
]


@dataclass
class DDChannelOperator:
    """Dense DD-domain channel matrix plus the tensors it is built from.

    H               MN x MN matrix on Doppler-innermost frame vectors
    h_tensor        [l, d, p] per-path gain at output delay l and lag d
    doppler_kernel  [p, k, n] Doppler leakage of path p, row k from column n
    phase_mask      [l, d, n] unit phase applied when the lag crosses the
                    multicarrier symbol boundary (d > l)
    """

    H: np.ndarray
    h_tensor: np.ndarray
    doppler_kernel: np.ndarray
    phase_mask: np.ndarray


def modulate(frame, params):
    """DD grid to time samples: unitary IDFT across Doppler per delay row,
    delay-major serialization, then a cyclic prefix of D samples."""
    if frame.grid.shape != (params.M, params.N):
        raise ValueError("frame does not match params")
    x_dt = np.fft.ifft(frame.grid, axis=1) * np.sqrt(params.N)
    x = x_dt.T.reshape(-1)  # x[n M + l] = X_DT[l, n]
    return np.concatenate([x[-params.D:], x])


def demodulate(y, params):
    """Time samples (cyclic prefix already consumed) back to the DD grid."""
    y = np.asarray(y)
    if y.size != params.frame_len:
        raise ValueError("expected M N samples")
    y_dt = y.reshape(params.N, params.M).T
    return DDFrame(np.fft.fft(y_dt, axis=1) / np.sqrt(params.N))


def apply_channel_time(x_cp, channel, sigma2, params, rng=None):
    """Pass prefixed samples through the channel, consuming the prefix.

    y[q] = sum_{d=0}^{D} h[d, q] x[q - d] + z[q] with
    h[d, q] = sum_p rho_p g((d - l_p) Ts) e^{j 2 pi k_p (q - l_p) / (M N)};
    the prefix absorbs the negative sample indices.
    """
    x_cp = np.asarray(x_cp)
    mn = params.frame_len
    if x_cp.size != mn + params.D:
        raise ValueError("expected M N + D samples")
    validate_paths(channel, params, strict=True)
    q = np.arange(mn)
    lags = np.arange(params.D + 1)
    y = np.zeros(mn, dtype=complex)
    for p in range(channel.P):
        taps = eval_effective_pulse((lags - channel.l[p]) * params.ts, params)
        conv = np.zeros(mn, dtype=complex)
        for d in range(params.D + 1):
            conv += taps[d] * x_cp[params.D - d: params.D - d + mn]
        y += channel.rho[p] * np.exp(2j * np.pi * channel.k[p] * (q - channel.l[p]) / mn) * conv
    if sigma2 > 0:
        y = y + np.sqrt(sigma2 / 2.0) * (rng.standard_normal(mn) + 1j * rng.standard_normal(mn))
    return y


def build_H_DD(channel, params):
    """Assemble the equivalent DD-domain channel operator.

    Output row (l, k) couples to input ([l - d]_M, n) through the per-path
    gain at lag d, the Doppler leakage ratio, and the boundary phase.
    Accepts closed region bounds and an empty path set (zero operator).
    """
    validate_paths(channel, params, strict=False)
    M, N, D = params.M, params.N, params.D
    mn = params.frame_len
    P = channel.P
    l_out = np.arange(M)[:, None]
    d_lag = np.arange(D + 1)[None, :]
    h_tensor = np.zeros((M, D + 1, P), dtype=complex)
    kernel = np.zeros((P, N, N), dtype=complex)
    rows = np.arange(N)[:, None]
    cols = np.arange(N)[None, :]
    for p in range(P):
        g_vals = eval_effective_pulse((d_lag - channel.l[p]) * params.ts, params)
        h_tensor[:, :, p] = channel.rho[p] * g_vals * np.exp(
            2j * np.pi * (l_out - channel.l[p]) * channel.k[p] / mn)
        kernel[p] = periodic_dirichlet(cols + channel.k[p] - rows, N)
    psi = np.exp(-2j * np.pi * np.arange(N) / N)
    phase_mask = np.ones((M, D + 1, N), dtype=complex)
    for l in range(M):
        phase_mask[l, l + 1:, :] = psi[None, :]  # lags d > l wrap the boundary
    H = np.zeros((mn, mn), dtype=complex)
    for l in range(M):
        for d in range(D + 1):
            block = np.einsum("p,pkn->kn", h_tensor[l, d, :], kernel)
            block = block * phase_mask[l, d][None, :]
            m = (l - d) % M
            H[l * N:(l + 1) * N, m * N:(m + 1) * N] += block
    return DDChannelOperator(H, h_tensor, kernel, phase_mask)


def apply_H_DD(op, frame, sigma2, rng=None):
    """y = H x plus circular white noise, in frame form."""
    v = vectorize_frame(frame)
    if op.H.shape[1] != v.size:
        raise ValueError("operator and frame sizes differ")
    out = op.H @ v
    if sigma2 > 0:
        out = out + np.sqrt(sigma2 / 2.0) * (
            rng.standard_normal(v.size) + 1j * rng.standard_normal(v.size))
    M = op.phase_mask.shape[0]
    N = op.phase_mask.shape[2]
    return devectorize(out, M, N)
