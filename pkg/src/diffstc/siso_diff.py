"""Single-antenna differential modulation and multiple-symbol detection.

Transmitter
-----------
DPSK accumulates the phase index modulo ``q_p``; DASK accumulates the
exponent of the ring ratio modulo ``q_a`` (which turns the amplitude
alphabet into a cyclic group); DAPSK does both on the phase and amplitude
halves of the information integer.  A symbol with phase index ``P`` and
amplitude exponent ``E`` is ``c a**E exp(j 2 pi P / q_p)`` with ``c`` the
energy normalizer, and the reference symbol has ``P = E = 0``.

Receiver
--------
Received symbols are split into windows of length ``T`` that overlap by
one symbol.  For each window every differentially consistent candidate
``s`` (``q**(T-1)`` of them) is scored with one of

=========  ==========================================  ==========================
metric     non-constant envelope (maximize)            constant envelope
=========  ==========================================  ==========================
ML_AWGN    ln I0(2 sqrt(rho) |y^H s|) - rho ||s||^2     |y^H s|
ML_RBF     rho |y^H s|^2 / (1 + rho ||s||^2)            |y^H s|
           - ln(1 + rho ||s||^2)
ML_RFF     rho y^H D (L^-1 + rho |D|^2)^-1 D^H y        minimize
           - ln det(I + rho |D|^2 L)                    y^H D (L + I/rho)^-1 D^H y
GLRT       |y^H s|^2 / ||s||^2                          same
CORR       |y^H s|                                      same
=========  ==========================================  ==========================

with ``D = diag(s)`` and ``L`` the Jakes covariance of the window.  The
receiver knows the amplitude exponent of each window's reference symbol
from its own previous decisions (the first reference has exponent 0).

The SIMO reference receivers (coherent maximum ratio combining and
conventional differential detection with ``N`` antennas) live here too.
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from itertools import product

import numpy as np
from scipy.special import i0e

from .alphabets import Kind
from .channels import ChannelKind
from .errors import CapacityError, ParameterError, UnsupportedError

#: largest candidate table enumerated by MSDD
CANDIDATE_GUARD = 2 ** 20
#: argument above which ln I0 is replaced by its large-argument form
BESSEL_SWITCH = 20.0


class Metric(str, Enum):
    ML_AWGN = "ML_AWGN"
    ML_RBF = "ML_RBF"
    ML_RFF = "ML_RFF"
    GLRT = "GLRT"
    CORR = "CORR"


class Mode(str, Enum):
    COMBINED = "COMBINED"
    QUASI_INDEPENDENT = "QUASI_INDEPENDENT"


@dataclass(frozen=True, eq=False)
class MsddConfig:
    """Receiver configuration for multiple-symbol differential detection.

    Parameters
    ----------
    T : int
        Window length (``T = 2`` is conventional differential detection).
    metric : Metric
    mode : Mode
    rho : float, optional
        Linear SNR, required by the ML metrics for non-constant envelopes
        and by ``ML_RFF`` always.
    cov : ndarray, optional
        ``T x T`` channel covariance for ``ML_RFF``.
    channel : ChannelKind, optional
        Channel the receiver is used on; GLRT is rejected for ``RFF``.
    simplify : bool
        Use the constant-envelope form of the metric for PSK alphabets.
    """

    T: int
    metric: Metric
    mode: Mode = Mode.COMBINED
    rho: float = None
    cov: np.ndarray = None
    channel: ChannelKind = None
    simplify: bool = True

    def __post_init__(self):
        object.__setattr__(self, "metric", Metric(self.metric))
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.channel is not None:
            object.__setattr__(self, "channel", ChannelKind(self.channel))
        if int(self.T) < 2:
            raise ParameterError("window length must be at least 2")
        if self.metric is Metric.GLRT and self.channel is ChannelKind.RFF:
            raise UnsupportedError("unsupported metric/channel: GLRT cannot be used over fast fading")
        if self.metric is Metric.ML_RFF:
            if self.cov is None or np.shape(self.cov) != (self.T, self.T):
                raise ParameterError("ML_RFF requires a T x T covariance")
            if self.rho is None:
                raise ParameterError("ML_RFF requires rho")
        if self.rho is not None and self.rho <= 0:
            raise ParameterError("rho must be positive")


def alphabet_split(constellation):
    """``(q_p, q_a, a, c)`` of a differential group alphabet.

    Raises
    ------
    UnsupportedError
        For constellations without group structure (QAM and friends).
    """
    k = constellation.kind
    if k is Kind.PSK:
        if constellation.meta.get("phase_offset", 0.0) != 0.0:
            raise UnsupportedError("differential PSK needs a zero phase offset")
        return constellation.size, 1, 1.0, 1.0
    if k in (Kind.DASK, Kind.DAPSK):
        m = constellation.meta
        return int(m["q_p"]), int(m["q_a"]), float(m["a"]), float(m["amp_scale"])
    raise UnsupportedError(f"{k.value} is not a differential group alphabet")


def _symbols(P, E, q_p, a, c):
    return c * np.power(a, E) * np.exp(2j * np.pi * P / q_p)


def _accumulate(info, q_p, q_a, e0=0):
    """Cumulative phase indices and amplitude exponents, reference included."""
    info = np.asarray(info, dtype=np.int64)
    p, d = np.divmod(info, q_a)
    zero = np.zeros(info.shape[:-1] + (1,), dtype=np.int64)
    P = np.concatenate([zero, np.cumsum(p, axis=-1)], axis=-1) % q_p
    E = (np.concatenate([zero, np.cumsum(d, axis=-1)], axis=-1) + np.asarray(e0)[..., None]) % q_a
    return P, E


def diff_encode(info, constellation, split=None, include_reference=False):
    """Differentially encode information integers.

    Parameters
    ----------
    info : array_like of int, shape (..., n)
        Symbol indices into `constellation` (phase part ``info // q_a``,
        amplitude part ``info % q_a``).
    constellation : Constellation
        PSK, DASK or DAPSK alphabet.
    split : DapskSplit, optional
        Expected phase/amplitude split; checked against the alphabet.
    include_reference : bool
        Prepend the reference symbol ``s_0``.

    Returns
    -------
    ndarray of complex, shape (..., n) or (..., n + 1)
    """
    q_p, q_a, a, c = alphabet_split(constellation)
    if split is not None and (split.q_p, split.q_a) != (q_p, q_a):
        raise ParameterError("split does not match the constellation")
    info = np.asarray(info, dtype=np.int64)
    if np.any(info < 0) or np.any(info >= q_p * q_a):
        raise ParameterError("information integer out of range")
    P, E = _accumulate(info, q_p, q_a)
    s = _symbols(P, E, q_p, a, c)
    return s if include_reference else s[..., 1:]


def differential_decode_info(P, E, q_p, q_a):
    """Inverse of the accumulation: information integers from indices."""
    p = np.diff(P, axis=-1) % q_p
    d = np.diff(E, axis=-1) % q_a
    return p * q_a + d


@lru_cache(maxsize=64)
def _candidate_table(q_p, q_a, a, c, T, e0):
    q = q_p * q_a
    if q ** (T - 1) > CANDIDATE_GUARD:
        raise CapacityError(f"{q}^{T - 1} candidates exceed the guard {CANDIDATE_GUARD}")
    Z = np.array(list(product(range(q), repeat=T - 1)), dtype=np.int64).reshape(-1, T - 1)
    P, E = _accumulate(Z, q_p, q_a, e0)
    S = _symbols(P, E, q_p, a, c)
    for arr in (Z, S, E):
        arr.setflags(write=False)
    return S, Z, E


def enumerate_candidates(constellation, T, ref_exponent=0):
    """All ``q**(T-1)`` candidate windows, lexicographic in the information integers.

    Returns
    -------
    (ndarray, ndarray)
        Candidate symbol vectors, shape (L, T), whose first entry is the
        reference symbol, and the information integers, shape (L, T-1).
    """
    q_p, q_a, a, c = alphabet_split(constellation)
    S, Z, _ = _candidate_table(q_p, q_a, a, c, int(T), int(ref_exponent) % q_a)
    return S, Z


def ln_i0_approx(z):
    """``ln I0(z)``; exact for ``z <= 20``, ``z - ln sqrt(2 pi z)`` above."""
    z = np.asarray(z, dtype=float)
    zc = np.minimum(z, BESSEL_SWITCH)
    exact = np.log(i0e(zc)) + zc
    big = np.maximum(z, BESSEL_SWITCH)
    out = np.where(z > BESSEL_SWITCH, big - 0.5 * np.log(2 * np.pi * big), exact)
    return out if out.ndim else float(out)


def _inner(Y, S):
    # y^H s for every row of Y against shared (L, T) or per-row (B, L, T) candidates
    if S.ndim == 2:
        return Y.conj() @ S.T
    return np.einsum("bt,blt->bl", Y.conj(), S)


def _rff_quad(Y, S, A):
    """``y^H diag(s) A diag(s)^H y`` for all rows / candidates."""
    T = Y.shape[-1]
    R = (Y.conj()[:, :, None] * Y[:, None, :] * A[None]).reshape(len(Y), T * T)
    if S.ndim == 2:
        Pm = (S[:, :, None] * S.conj()[:, None, :]).reshape(len(S), T * T)
        return np.real(R @ Pm.T)
    Pm = (S[..., :, None] * S.conj()[..., None, :]).reshape(S.shape[0], S.shape[1], T * T)
    return np.real(np.einsum("bk,blk->bl", R, Pm))


def _rff_nonconst(Y, S, cfg):
    rho, lam = cfg.rho, np.asarray(cfg.cov, dtype=np.complex128)
    T = lam.shape[0]
    absd2 = np.abs(S) ** 2
    Mx = np.eye(T) + rho * absd2[..., :, None] * lam  # I + rho |D|^2 Lambda
    inv = np.linalg.inv(Mx)
    K = rho * (S[..., :, None] * (lam @ inv)) * S.conj()[..., None, :]  # rho D L (I+rho|D|^2 L)^-1 D^H
    _, logdet = np.linalg.slogdet(Mx)
    Yv = (Y.conj()[:, :, None] * Y[:, None, :]).reshape(len(Y), T * T)
    if S.ndim == 2:
        quad = np.real(Yv @ K.reshape(len(S), T * T).T)
    else:
        quad = np.real(np.einsum("bk,blk->bl", Yv, K.reshape(S.shape[0], S.shape[1], T * T)))
    return quad - logdet


def msdd_scores(Y, S, cfg, constant_envelope):
    """Scores to maximize and the metric values as defined, shape (B, L).

    Parameters
    ----------
    Y : ndarray, shape (B, T)
    S : ndarray, shape (L, T) or (B, L, T)
    cfg : MsddConfig
    constant_envelope : bool
        Whether all candidates have unit-magnitude entries; only used when
        ``cfg.simplify`` is set.
    """
    m = cfg.metric
    const = constant_envelope and cfg.simplify
    if m is Metric.ML_RFF:
        if const:
            lam = np.asarray(cfg.cov, dtype=np.complex128)
            A = np.linalg.inv(lam + np.eye(lam.shape[0]) / cfg.rho)
            v = _rff_quad(Y, S, A)
            return -v, v
        v = _rff_nonconst(Y, S, cfg)
        return v, v
    c = np.abs(_inner(Y, S))
    if m is Metric.CORR or (const and m in (Metric.ML_AWGN, Metric.ML_RBF)):
        return c, c
    e = np.sum(np.abs(S) ** 2, axis=-1)
    if m is Metric.GLRT:
        v = c ** 2 / e
        return v, v
    if cfg.rho is None:
        raise ParameterError(f"{m.value} with a non-constant envelope requires rho")
    rho = cfg.rho
    if m is Metric.ML_AWGN:
        v = ln_i0_approx(2.0 * np.sqrt(rho) * c) - rho * e
    else:
        v = rho / (1.0 + rho * e) * c ** 2 - np.log1p(rho * e)
    return v, v


def msdd_detect_batch(Y, cfg, constellation, ref_exponent=None):
    """Detect a batch of windows.

    Parameters
    ----------
    Y : ndarray, shape (B, T)
    cfg : MsddConfig
    constellation : Constellation
    ref_exponent : array_like of int, shape (B,), optional
        Amplitude exponent of every window's reference symbol (0 if omitted).

    Returns
    -------
    (ndarray, ndarray, ndarray)
        Information integers (B, T-1), winning metric values (B,) and the
        amplitude exponent of each window's last symbol (B,).
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=np.complex128))
    B, T = Y.shape
    if T != cfg.T:
        raise ParameterError(f"window has {T} symbols, configuration expects {cfg.T}")
    q_p, q_a, a, c = alphabet_split(constellation)
    e0 = np.zeros(B, dtype=np.int64) if ref_exponent is None else np.asarray(ref_exponent, dtype=np.int64) % q_a
    info = np.empty((B, T - 1), dtype=np.int64)
    value = np.empty(B)
    last = np.empty(B, dtype=np.int64)
    quasi = cfg.mode is Mode.QUASI_INDEPENDENT and q_a > 1
    if quasi and cfg.metric is Metric.ML_RFF:
        raise UnsupportedError("quasi-independent detection is not supported over fast fading")
    for e in np.unique(e0):
        rows = np.flatnonzero(e0 == e)
        if quasi:
            z, v, el = _quasi_independent(Y[rows], cfg, q_p, q_a, a, c, int(e))
        else:
            S, Z, E = _candidate_table(q_p, q_a, a, c, T, int(e))
            score, val = msdd_scores(Y[rows], S, cfg, q_a == 1)
            w = np.argmax(score, axis=1)
            z, v, el = Z[w], val[np.arange(len(rows)), w], E[w, -1]
        info[rows], value[rows], last[rows] = z, v, el
    return info, value, last


def _quasi_independent(Y, cfg, q_p, q_a, a, c, e0):
    T = Y.shape[1]
    Sp, Zp, _ = _candidate_table(q_p, 1, 1.0, 1.0, T, 0)
    wp = np.argmax(np.abs(_inner(Y, Sp)), axis=1)
    Pp, _ = _accumulate(Zp[wp], q_p, 1)  # (B, T) decided phase indices
    Za = np.array(list(product(range(q_a), repeat=T - 1)), dtype=np.int64).reshape(-1, T - 1)
    _, Ea = _accumulate(Za, 1, q_a, e0)  # (La, T)
    S = _symbols(Pp[:, None, :], Ea[None], q_p, a, c)  # (B, La, T)
    score, val = msdd_scores(Y, S, cfg, False)
    wa = np.argmax(score, axis=1)
    rows = np.arange(len(Y))
    info = Zp[wp] * q_a + Za[wa]
    return info, val[rows, wa], Ea[wa, -1]


def msdd_detect(y, cfg, constellation, ref_exponent=0):
    """Detect one window of ``T`` received symbols.

    Returns
    -------
    (ndarray, float)
        The ``T - 1`` information integers and the winning metric value
        (for constant-envelope ``ML_RFF`` the minimized quadratic form).
    """
    y = np.asarray(y, dtype=np.complex128).reshape(1, -1)
    info, value, _ = msdd_detect_batch(y, cfg, constellation, [ref_exponent])
    return info[0], float(value[0])


def msdd_detect_frame(y, cfg, constellation):
    """Detect a whole frame ``y_0 .. y_{W (T-1)}`` window by window.

    Parameters
    ----------
    y : ndarray, shape (B, W (T - 1) + 1)
        Received frames including the reference symbol.

    Returns
    -------
    ndarray of int, shape (B, W (T - 1))
    """
    y = np.atleast_2d(y)
    B, n = y.shape
    T = cfg.T
    W = (n - 1) // (T - 1)
    if W * (T - 1) + 1 != n:
        raise ParameterError("frame length must be a multiple of T - 1 plus one")
    _, q_a, _, _ = alphabet_split(constellation)
    e = np.zeros(B, dtype=np.int64)
    out = np.empty((B, W * (T - 1)), dtype=np.int64)
    for w in range(W):
        seg = y[:, w * (T - 1): w * (T - 1) + T]
        info, _, e = msdd_detect_batch(seg, cfg, constellation, e)
        out[:, w * (T - 1):(w + 1) * (T - 1)] = info
    return out


def conventional_detect(y_prev, y_cur, constellation):
    """Symbol-by-symbol DPSK decision ``argmax_v Re{v conj(y_cur) ... }``.

    Decides ``argmax_v Re{v y_prev conj(y_cur)}^*``, i.e. the phase step
    closest to ``arg(y_cur / y_prev)``.
    """
    pts = constellation.points
    r = np.asarray(y_cur) * np.conj(np.asarray(y_prev))
    return np.argmax(np.real(np.multiply.outer(r, pts.conj())), axis=-1)


def simo_mrc_detect(y_row, h_row, constellation, rho=1.0):
    """Coherent maximum-ratio-combining decision for a ``1 x N`` observation.

    ``s~ = y h^H`` is compared with ``sqrt(rho) ||h||^2 x`` for every
    alphabet point; works on batches with the antenna axis last.
    """
    y = np.asarray(y_row, dtype=np.complex128)
    h = np.asarray(h_row, dtype=np.complex128)
    st = np.sum(y * h.conj(), axis=-1)
    g = np.sqrt(rho) * np.sum(np.abs(h) ** 2, axis=-1)
    d = np.abs(st[..., None] - g[..., None] * constellation.points) ** 2
    win = np.argmin(d, axis=-1)
    return int(win) if np.ndim(win) == 0 else win


def simo_diff_detect(y_prev, y_cur, constellation):
    """Differential SIMO decision ``argmax_v Re{v y_prev y_cur^H}``.

    Raises
    ------
    UnsupportedError
        For alphabets that are not constant envelope.
    """
    if not constellation.is_constant_envelope:
        raise UnsupportedError("differential SIMO detection needs a PSK alphabet")
    vt = np.sum(np.asarray(y_prev) * np.conj(np.asarray(y_cur)), axis=-1)
    win = np.argmax(np.real(np.multiply.outer(vt, constellation.points)), axis=-1)
    return int(win) if np.ndim(win) == 0 else win
