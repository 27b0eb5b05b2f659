"""Channel models and random draws.

Three models are provided:

``AWGN_PHASE``
    unit gain with an unknown carrier phase uniform on (-pi, pi], drawn
    once per frame.
``RBF``
    Rayleigh block fading; i.i.d. CN(0, 1) coefficients held constant
    over a frame.
``RFF``
    single-antenna Rayleigh fast fading with Jakes autocorrelation
    ``J0(2 pi m fdts)``, generated by coloring white CN(0, 1) samples with
    a Cholesky factor of the Toeplitz covariance.

The received signal is ``Y = sqrt(rho) S H + W`` with ``W`` i.i.d. CN(0, 1)
so that ``rho`` is the SNR at every receive antenna.

Randomness comes from :class:`RngStream` values.  A stream is fully
determined by ``(seed, substream)`` and uses the counter-based Philox
generator, so simulations can hand out disjoint substreams to frames or
frame chunks and remain reproducible regardless of worker count.
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .errors import ParameterError, ShapeError, UnsupportedError

#: argument below which J0 is evaluated by its power series
J0_SERIES_LIMIT = 8.0
#: initial diagonal jitter for the Cholesky factor of a fading covariance
CHOL_JITTER = 1e-12


class ChannelKind(str, Enum):
    AWGN_PHASE = "AWGN_PHASE"
    RBF = "RBF"
    RFF = "RFF"


@dataclass(frozen=True)
class ChannelModel:
    """Channel descriptor.

    Parameters
    ----------
    kind : ChannelKind
    fdts : float
        Normalized Doppler frequency, only used by ``RFF``.
    coherence : int
        Number of symbols (SISO) or blocks (MIMO) the realization is held
        for, i.e. the frame length.
    """

    kind: ChannelKind
    fdts: float = 0.0
    coherence: int = 150

    def __post_init__(self):
        object.__setattr__(self, "kind", ChannelKind(self.kind))
        if not 0.0 <= self.fdts < 1.0:
            raise ParameterError("fdts must lie in [0, 1)")
        if int(self.coherence) < 1:
            raise ParameterError("coherence must be at least 1")


@dataclass(frozen=True)
class RngStream:
    """Reproducible random substream identified by ``(seed, substream)``."""

    seed: int
    substream: int = 0

    def generator(self):
        ss = np.random.SeedSequence(entropy=int(self.seed) & (2 ** 64 - 1),
                                    spawn_key=(int(self.substream),))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, index):
        """A stream for sub-item `index` (disjoint from the parent)."""
        return RngStream(self.seed, int(self.substream) * 1_000_003 + int(index) + 1)


def _as_generator(rng):
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return np.random.default_rng()
    return RngStream(int(rng)).generator()


def complex_normal(gen, shape):
    """I.i.d. CN(0, 1) samples from a numpy Generator."""
    return (gen.standard_normal(shape) + 1j * gen.standard_normal(shape)) * np.sqrt(0.5)


def bessel_j0(x):
    """Bessel function of the first kind, order zero.

    Power series for ``|x| < 8``; Hankel asymptotic expansion truncated at
    its smallest term otherwise.
    """
    x = np.abs(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    small = x < J0_SERIES_LIMIT
    if np.any(small):
        xs = x[small]
        y = -(xs * xs) / 4.0
        term = np.ones_like(xs)
        total = np.ones_like(xs)
        for k in range(1, 60):
            term = term * y / (k * k)
            total = total + term
        out[small] = total
    if np.any(~small):
        xl = x[~small]
        p = np.ones_like(xl)
        q = np.zeros_like(xl)
        # a_k = prod_{i=1..k} (2i-1)^2 / (k! 8^k)
        a = 1.0
        last = np.full_like(xl, np.inf)
        done = np.zeros(xl.shape, dtype=bool)
        for k in range(1, 40):
            a = a * (2 * k - 1) ** 2 / (8.0 * k)
            t = a / xl ** k
            done |= t > last
            t = np.where(done, 0.0, t)
            sign = (-1.0) ** ((k + 1) // 2) if k % 2 else (-1.0) ** (k // 2)
            if k % 2:
                q = q + sign * t
            else:
                p = p + sign * t
            last = np.where(done, last, t)
        chi = xl - np.pi / 4
        out[~small] = np.sqrt(2.0 / (np.pi * xl)) * (p * np.cos(chi) - q * np.sin(chi))
    return out if out.ndim else float(out)


def jakes_phi(m, fdts):
    """Jakes autocorrelation ``J0(2 pi m fdts)`` at integer lag `m`."""
    if not 0.0 <= fdts < 1.0:
        raise ParameterError("fdts must lie in [0, 1)")
    return bessel_j0(2.0 * np.pi * np.asarray(m, dtype=float) * fdts)


def rff_covariance(T, fdts):
    """``T x T`` Toeplitz channel covariance with entries ``jakes_phi(|i-j|)``."""
    if int(T) < 1:
        raise ParameterError("window length must be positive")
    lags = np.abs(np.subtract.outer(np.arange(T), np.arange(T)))
    phi = np.atleast_1d(jakes_phi(np.arange(T), fdts))
    return phi[lags].astype(np.complex128)


@lru_cache(maxsize=64)
def rff_coloring(T, fdts):
    """Lower-triangular coloring matrix ``L`` with ``L L^H`` close to the covariance.

    The Cholesky factor is tried with jitter growing from
    :data:`CHOL_JITTER` by decades; long, slowly varying windows are
    numerically rank deficient and fall back to a symmetric eigenvalue
    square root with negative eigenvalues clipped.
    """
    c = rff_covariance(T, fdts).real
    jitter = CHOL_JITTER
    while jitter <= 1e-8:
        try:
            return np.linalg.cholesky(c + jitter * np.eye(T))
        except np.linalg.LinAlgError:
            jitter *= 10.0
    w, v = np.linalg.eigh(c)
    return v * np.sqrt(np.clip(w, 0.0, None))


def draw_channel(model, M, N, T, rng, batch=None):
    """Draw a channel realization.

    Returns
    -------
    ndarray
        For SISO (``M == N == 1``) the per-symbol coefficients, shape
        ``batch + (T,)``: constant ``exp(j Theta)`` for ``AWGN_PHASE``, a
        constant CN(0, 1) value for ``RBF`` and a Jakes-correlated sequence
        for ``RFF``.  For multiple antennas (``RBF`` only) an ``M x N``
        matrix per batch entry, shape ``batch + (M, N)``.

    Raises
    ------
    UnsupportedError
        ``RFF`` or ``AWGN_PHASE`` with more than one antenna.
    """
    if min(M, N, T) < 1:
        raise ParameterError("dimensions must be positive")
    gen = _as_generator(rng)
    batch = () if batch is None else tuple(np.atleast_1d(batch))
    kind = ChannelKind(model.kind)
    if M * N > 1:
        if kind is not ChannelKind.RBF:
            raise UnsupportedError(f"{kind.value} is only supported for single-antenna links")
        return complex_normal(gen, batch + (M, N))
    if kind is ChannelKind.AWGN_PHASE:
        theta = np.pi - 2.0 * np.pi * gen.random(batch + (1,))
        return np.repeat(np.exp(1j * theta), T, axis=-1)
    if kind is ChannelKind.RBF:
        return np.repeat(complex_normal(gen, batch + (1,)), T, axis=-1)
    g = complex_normal(gen, batch + (T,))
    return g @ rff_coloring(int(T), float(model.fdts)).T


def transmit(S, H, rho, rng, noise=True):
    """MIMO link ``Y = sqrt(rho) S H + W``.

    Parameters
    ----------
    S : ndarray, shape (..., T, M)
    H : ndarray, shape (..., M, N)
    rho : float
        Linear SNR per receive antenna.
    rng : RngStream, Generator or int
    noise : bool
        Disable to get the noiseless product (test hook).
    """
    S = np.asarray(S, dtype=np.complex128)
    H = np.asarray(H, dtype=np.complex128)
    if rho < 0:
        raise ParameterError("rho must be nonnegative")
    if S.ndim < 2 or H.ndim < 2 or S.shape[-1] != H.shape[-2]:
        raise ShapeError(f"cannot transmit S{S.shape} over H{H.shape}")
    Y = np.sqrt(rho) * (S @ H)
    if noise:
        Y = Y + complex_normal(_as_generator(rng), Y.shape)
    return Y


def transmit_siso(s, h, rho, rng, noise=True):
    """Single-antenna link ``y_t = sqrt(rho) s_t h_t + w_t`` (elementwise)."""
    s = np.asarray(s, dtype=np.complex128)
    h = np.asarray(h, dtype=np.complex128)
    if rho < 0:
        raise ParameterError("rho must be nonnegative")
    try:
        y = np.sqrt(rho) * s * h
    except ValueError as exc:
        raise ShapeError(f"cannot transmit s{s.shape} over h{h.shape}") from exc
    if noise:
        y = y + complex_normal(_as_generator(rng), y.shape)
    return y
