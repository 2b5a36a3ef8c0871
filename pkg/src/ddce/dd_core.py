"""Delay-Doppler primitives shared by the whole chain.

System parameters, DD frames, channel path sets, the effective
(raised-cosine) pulse, the Doppler leakage ratio, and the vectorization
convention every other module relies on.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SystemParams",
    "DDFrame",
    "PathSet",
    "validate_paths",
    "eval_effective_pulse",
    "periodic_dirichlet",
    "generate_jakes_channel",
    "vectorize_frame",
    "devectorize",
]


@dataclass(frozen=True)
class SystemParams:
    """Static description of the frame, pulse, and pilot geometry.

    M, N             delay / Doppler bins of the DD grid
    T                multicarrier symbol interval [s]; sample period is T/M
    fc               carrier frequency [Hz]
    D                cyclic prefix length in samples (max delay spread)
    kmax             maximum normalized Doppler magnitude (integer bound)
    beta             root-raised-cosine roll-off
    l0, k0           pilot position on the DD grid
    pilot_offset_db  pilot-to-data power ratio [dB]
    snr_db           data-symbol SNR [dB]
    """

    M: int = 32
    N: int = 32
    T: float = 1.0 / 15000.0
    fc: float = 4e9
    D: int = 4
    kmax: int = 4
    beta: float = 0.15
    l0: int = 16
    k0: int = 16
    pilot_offset_db: float = 30.0
    snr_db: float = 10.0

    def __post_init__(self):
        if self.M < 1 or self.N < 1 or self.D < 1:
            raise ValueError("M, N, D must be positive")
        if self.kmax < 0:
            raise ValueError("kmax must be nonnegative")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if not (0 <= self.l0 < self.M and 0 <= self.k0 < self.N):
            raise ValueError("pilot position outside the frame")

    @property
    def ts(self):
        return self.T / self.M

    @property
    def m_t(self):
        return self.D + 1

    @property
    def n_t(self):
        return 2 * self.kmax + 1

    @property
    def region_size(self):
        return self.m_t * self.n_t

    @property
    def frame_len(self):
        return self.M * self.N

    @property
    def pilot_amplitude(self):
        # relative to the nominal unit data-symbol power
        return 10.0 ** (self.pilot_offset_db / 20.0)

    def check_pilot_region(self):
        """The guard block around (l0, k0) must fit inside the frame."""
        if self.l0 - self.D < 0 or self.l0 + self.D > self.M - 1:
            raise ValueError("delay guard does not fit the frame")
        if self.k0 - 2 * self.kmax < 0 or self.k0 + 2 * self.kmax > self.N - 1:
            raise ValueError("Doppler guard does not fit the frame")


@dataclass
class DDFrame:
    """A complex DD-domain grid; entry [l, k] sits at delay l, Doppler k."""

    grid: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=complex)
        if g.ndim != 2:
            raise ValueError("frame grid must be 2-D")
        self.grid = g


@dataclass
class PathSet:
    """Complex gains rho over real normalized delays l and Dopplers k."""

    rho: np.ndarray
    l: np.ndarray
    k: np.ndarray

    def __post_init__(self):
        self.rho = np.atleast_1d(np.asarray(self.rho, dtype=complex))
        self.l = np.atleast_1d(np.asarray(self.l, dtype=float))
        self.k = np.atleast_1d(np.asarray(self.k, dtype=float))
        if not (self.rho.shape == self.l.shape == self.k.shape):
            raise ValueError("rho, l, k must have matching lengths")
        for arr in (self.rho, self.l, self.k):
            if not np.all(np.isfinite(arr)):
                raise ValueError("path parameters must be finite")

    @property
    def P(self):
        return self.rho.size


def validate_paths(paths, params, strict=True):
    """Bounds check against params.

    strict demands the open intervals 0 < l < D and |k| < kmax required of a
    physical channel realization; the lenient form accepts the closed
    estimation-region bounds produced by estimators, and P = 0.
    """
    if strict:
        if paths.P < 1:
            raise ValueError("at least one path required")
        if np.any(paths.l <= 0.0) or np.any(paths.l >= params.D):
            raise ValueError("path delays must lie strictly inside (0, D)")
        if np.any(np.abs(paths.k) >= params.kmax):
            raise ValueError("path Dopplers must lie strictly inside (-kmax, kmax)")
    elif paths.P:
        if (np.any(paths.l < 0.0) or np.any(paths.l > params.D)
                or np.any(np.abs(paths.k) > params.kmax)):
            raise ValueError("path parameters outside the estimation region")


def eval_effective_pulse(tau, params):
    """Effective pulse g(tau): the autocorrelation of the root-raised-cosine
    shaping pulse, i.e. a raised cosine with g(0) = 1 and zeros at nonzero
    integer multiples of the sample period. tau is in seconds.
    """
    u = np.asarray(tau, dtype=float) / params.ts
    b = params.beta
    if b == 0.0:
        out = np.sinc(u)
        return float(out) if np.ndim(out) == 0 else out
    den = 1.0 - (2.0 * b * u) ** 2
    # removable singularity at |u| = 1/(2 beta)
    near = np.abs(den) < 1e-8
    limit = (np.pi / 4.0) * np.sinc(1.0 / (2.0 * b))
    val = np.sinc(u) * np.cos(np.pi * b * u) / np.where(near, 1.0, den)
    out = np.where(near, limit, val)
    return float(out) if np.ndim(out) == 0 else out


def periodic_dirichlet(x, n):
    """(1/n) (1 - e^{j 2 pi x}) / (1 - e^{j 2 pi x / n}).

    The removable cases are resolved analytically with an exact integer
    test: 1 when x is an integer multiple of n, 0 at other integers.
    """
    x = np.asarray(x, dtype=float)
    xr = np.round(x)
    is_int = x == xr
    on_mult = is_int & (np.mod(xr, n) == 0)
    safe = np.where(is_int, 0.25, x)
    ratio = (1.0 - np.exp(2j * np.pi * safe)) / (n * (1.0 - np.exp(2j * np.pi * safe / n)))
    out = np.where(is_int, np.where(on_mult, 1.0 + 0.0j, 0.0 + 0.0j), ratio)
    return complex(out) if np.ndim(out) == 0 else out


def generate_jakes_channel(P, fd_hz, params, rng):
    """Draw P paths with Jakes Dopplers k_p = fd cos(theta_p) N T, delays
    uniform on the open interval (0, D), and unit expected total power."""
    if P < 1:
        raise ValueError("P must be at least 1")
    fd_norm = fd_hz * params.N * params.T
    if fd_norm >= params.kmax:
        raise ValueError("fd N T must be smaller than kmax")
    theta = 2.0 * np.pi - rng.uniform(0.0, 2.0 * np.pi, size=P)  # (0, 2 pi]
    k = fd_norm * np.cos(theta)
    l = rng.uniform(0.0, params.D, size=P)
    while np.any(l == 0.0):  # keep the interval open
        redraw = l == 0.0
        l[redraw] = rng.uniform(0.0, params.D, size=int(redraw.sum()))
    w = rng.uniform(0.0, 1.0, size=P)
    w = w / w.sum()
    rho = np.sqrt(w) * (rng.standard_normal(P) + 1j * rng.standard_normal(P)) / np.sqrt(2.0)
    paths = PathSet(rho, l, k)
    validate_paths(paths, params, strict=True)
    return paths


def vectorize_frame(frame):
    """Doppler-innermost stacking: element i = l N + k."""
    return frame.grid.reshape(-1)


def devectorize(v, M, N):
    """Inverse of vectorize_frame for an M x N grid."""
    v = np.asarray(v)
    if v.size != M * N:
        raise ValueError("vector length does not match the grid size")
    return DDFrame(v.reshape(M, N))
