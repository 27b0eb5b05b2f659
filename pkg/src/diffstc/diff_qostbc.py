"""Differential quasi-orthogonal codes through two orthogonal subsystems.

A block with the ``[[A, B], [B, A]]`` structure is turned into the block
diagonal ``diag(A + B, A - B)`` by multiplying the received halves (and
the channel halves) with ``[[I, I], [I, -I]]``.  The two resulting
subsystems are Alamouti systems that are encoded differentially on their
own, ``S^k_tau = V^k S^k_{tau-1} / a^k_{tau-1}``.

Four information symbols ``x_1..x_4`` are interleaved into

    v_1 = x_1^R + j x_3^R,  v_2 = x_2^R + j x_4^R,
    v_3 = -x_1^I + j x_3^I, v_4 = -x_2^I + j x_4^I

and the subsystem symbols are ``c = (v_1 + v_3, v_2 + v_4, v_1 - v_3,
v_2 - v_4)`` in the combined (full diversity, ``p = 4``) scheme and
``c = v`` in the uncombined (half diversity, ``p = 2``) scheme.  Subsystem
``k`` then carries ``V^k = [[c, d], [-d*, c*]] / sqrt(p)`` with
``(c, d) = (c_1, c_2)`` or ``(c_3, c_4)``.
"""

from dataclasses import dataclass
from enum import Enum
from itertools import product

import numpy as np

from .errors import DegenerateBlockError, ParameterError, ShapeError, UnsupportedError

class QostbcKind(str, Enum):
    COMBINED = "COMBINED"
    UNCOMBINED = "UNCOMBINED"


@dataclass(frozen=True)
class QostbcMode:
    """Construction tag with the per-subsystem normalizations."""

    mode: QostbcKind
    p1: float
    p2: float

    def __post_init__(self):
        object.__setattr__(self, "mode", QostbcKind(self.mode))
        want = 4.0 if self.mode is QostbcKind.COMBINED else 2.0
        if self.p1 != want or self.p2 != want:
            raise ParameterError(f"{self.mode.value} requires p1 = p2 = {want:g}")

    @classmethod
    def of(cls, mode):
        mode = QostbcKind(mode)
        p = 4.0 if mode is QostbcKind.COMBINED else 2.0
        return cls(mode, p, p)

    @property
    def p(self):
        return self.p1


@dataclass(frozen=True, eq=False)
class SubsystemPair:
    """Quantities of the two equivalent subsystems (``1E`` and ``2E``)."""

    first: np.ndarray
    second: np.ndarray
    a1: float = None
    a2: float = None


def subsystem_split(X):
    """``(X^1 + X^2, X^1 - X^2)`` of the row halves of `X` (..., M, N)."""
    X = np.asarray(X, dtype=np.complex128)
    M = X.shape[-2]
    if M % 2:
        raise ShapeError("subsystem split needs an even number of rows")
    top, bot = X[..., :M // 2, :], X[..., M // 2:, :]
    return SubsystemPair(top + bot, top - bot)


def subsystem_merge(pair):
    """Inverse of :func:`subsystem_split`."""
    f, s = np.asarray(pair.first), np.asarray(pair.second)
    return np.concatenate([(f + s) / 2, (f - s) / 2], axis=-2)


def abba_from_subsystems(S1, S2):
    """Transmit block ``[[A, B], [B, A]]`` with ``A + B = S1`` and ``A - B = S2``."""
    A, B = (S1 + S2) / 2, (S1 - S2) / 2
    return np.concatenate([np.concatenate([A, B], axis=-1), np.concatenate([B, A], axis=-1)], axis=-2)


def interleave(x):
    """MDC interleaving ``v_1..v_4`` of four symbols (last axis)."""
    x = np.asarray(x, dtype=np.complex128)
    if x.shape[-1] != 4:
        raise ShapeError("four symbols per block are required")
    xr, xi = x.real, x.imag
    return np.stack([xr[..., 0] + 1j * xr[..., 2], xr[..., 1] + 1j * xr[..., 3],
                     -xi[..., 0] + 1j * xi[..., 2], -xi[..., 1] + 1j * xi[..., 3]], axis=-1)


def subsystem_symbols(mode, x):
    """Subsystem symbols ``c_1..c_4`` for the construction `mode`."""
    v = interleave(x)
    if QostbcMode.of(mode.mode if isinstance(mode, QostbcMode) else mode).mode is QostbcKind.UNCOMBINED:
        return v
    return np.stack([v[..., 0] + v[..., 2], v[..., 1] + v[..., 3],
                     v[..., 0] - v[..., 2], v[..., 1] - v[..., 3]], axis=-1)


def _alamouti(c, d):
    c, d = np.asarray(c), np.asarray(d)
    return np.stack([np.stack([c, d], axis=-1), np.stack([-np.conj(d), np.conj(c)], axis=-1)], axis=-2)


def make_info_submatrices(mode, x, check=True):
    """Information matrices and amplitudes of both subsystems.

    Parameters
    ----------
    mode : QostbcMode or str
    x : array_like, shape (..., 4)
    check : bool
        Raise on a zero amplitude.

    Returns
    -------
    (ndarray, ndarray, ndarray, ndarray)
        ``V^1E``, ``V^2E`` of shape (..., 2, 2) and ``a1``, ``a2``.

    Raises
    ------
    DegenerateBlockError
        If one subsystem matrix vanishes (e.g. all-real symbols in the
        uncombined scheme).
    """
    m = mode if isinstance(mode, QostbcMode) else QostbcMode.of(mode)
    c = subsystem_symbols(m, x)
    sp = np.sqrt(m.p)
    V1 = _alamouti(c[..., 0], c[..., 1]) / sp
    V2 = _alamouti(c[..., 2], c[..., 3]) / sp
    a1 = np.sqrt((np.abs(c[..., 0]) ** 2 + np.abs(c[..., 1]) ** 2) / m.p)
    a2 = np.sqrt((np.abs(c[..., 2]) ** 2 + np.abs(c[..., 3]) ** 2) / m.p)
    if check and (np.any(a1 <= 1e-12) or np.any(a2 <= 1e-12)):
        raise DegenerateBlockError("subsystem information matrix has zero amplitude")
    return V1, V2, a1, a2


def encode_subsystems(prev, V1E, V2E, a1_prev, a2_prev):
    """One differential step in both subsystems.

    Parameters
    ----------
    prev : SubsystemPair
        Previous transmit blocks ``S^1E``, ``S^2E``.

    Returns
    -------
    SubsystemPair
        New blocks with their current amplitudes in ``a1``, ``a2``.
    """
    a1_prev, a2_prev = np.asarray(a1_prev, dtype=float), np.asarray(a2_prev, dtype=float)
    if np.any(a1_prev <= 0) or np.any(a2_prev <= 0):
        raise DegenerateBlockError("previous subsystem amplitude is zero")
    S1 = V1E @ prev.first / a1_prev[..., None, None]
    S2 = V2E @ prev.second / a2_prev[..., None, None]
    a1 = np.sqrt(np.sum(np.abs(V1E) ** 2, axis=(-2, -1)) / 2)
    a2 = np.sqrt(np.sum(np.abs(V2E) ** 2, axis=(-2, -1)) / 2)
    return SubsystemPair(S1, S2, a1, a2)


def encode_sequence(mode, x):
    """Transmit blocks for a batch of symbol sequences.

    Parameters
    ----------
    x : ndarray, shape (..., n, 4)

    Returns
    -------
    (ndarray, ndarray, ndarray)
        ABBA blocks (..., n + 1, 4, 4) with the identity reference first,
        and the subsystem amplitudes ``a1``, ``a2`` of shape (..., n + 1)
        (``a_0 = 1``).
    """
    V1, V2, a1, a2 = make_info_submatrices(mode, x)
    n = V1.shape[-3]
    lead = V1.shape[:-3]
    S1 = np.empty(lead + (n + 1, 2, 2), dtype=np.complex128)
    S2 = np.empty_like(S1)
    S1[..., 0, :, :] = np.eye(2)
    S2[..., 0, :, :] = np.eye(2)
    A1 = np.ones(lead + (n + 1,))
    A2 = np.ones(lead + (n + 1,))
    A1[..., 1:], A2[..., 1:] = a1, a2
    for t in range(n):
        S1[..., t + 1, :, :] = V1[..., t, :, :] @ S1[..., t, :, :] / A1[..., t, None, None]
        S2[..., t + 1, :, :] = V2[..., t, :, :] @ S2[..., t, :, :] / A2[..., t, None, None]
    return abba_from_subsystems(S1, S2), A1, A2


def _dispersion(mode):
    """Real-part and imaginary-part dispersion of every ``x_i`` in both subsystems.

    Returns two arrays of shape (2, 4, 2, 2): ``U[k, i]`` multiplies
    ``x_i^R`` and ``W[k, i] = j Q[k, i]`` multiplies ``x_i^I`` in
    ``sqrt(p) V^k``.
    """
    U = np.zeros((2, 4, 2, 2), dtype=np.complex128)
    W = np.zeros_like(U)
    for i in range(4):
        for part, out in ((1.0, U), (1j, W)):
            x = np.zeros(4, dtype=np.complex128)
            x[i] = part
            c = subsystem_symbols(mode, x)
            out[0, i] = _alamouti(c[0], c[1])
            out[1, i] = _alamouti(c[2], c[3])
    return U, W


def _tr_re(R, D):
    # Re tr(R D) for R (..., 2, 2) and D (4, 2, 2) -> (..., 4)
    return np.real(np.einsum("...ij,kji->...k", R, D))


def _stats(Yp, Yc, a_prev, p):
    R = Yp @ np.conj(np.swapaxes(Yc, -1, -2))
    yt = np.sum(np.abs(Yp) ** 2, axis=(-2, -1)) / (2.0 * np.sqrt(p) * np.asarray(a_prev, dtype=float))
    return R, yt


def combined_statistics(Yp_pair, Yc_pair, a1_prev, a2_prev):
    """``(y~_1, y~_2, x~_{i,1}, x~_{i,2})`` of the combined decoder."""
    U, _ = _dispersion(QostbcKind.COMBINED)
    R1, y1 = _stats(Yp_pair.first, Yc_pair.first, a1_prev, 4.0)
    R2, y2 = _stats(Yp_pair.second, Yc_pair.second, a2_prev, 4.0)
    return y1, y2, _tr_re(R1, U[0]), _tr_re(R2, U[1])


def decode_combined(Yp_pair, Yc_pair, constellation, a1_prev, a2_prev):
    """Symbol-wise decoder of the combined (full-diversity) scheme.

    For every symbol the sum of both subsystem metrics
    ``y~_k p a_k^2 - Re tr(R_k sqrt(p) V^k)`` is minimized, which only
    depends on that symbol because of the interleaving.

    Returns
    -------
    ndarray of int, shape (..., 4)
    """
    U, W = _dispersion(QostbcKind.COMBINED)
    R1, y1 = _stats(Yp_pair.first, Yc_pair.first, a1_prev, 4.0)
    R2, y2 = _stats(Yp_pair.second, Yc_pair.second, a2_prev, 4.0)
    tU = _tr_re(R1, U[0]), _tr_re(R2, U[1])
    tW = _tr_re(R1, W[0]), _tr_re(R2, W[1])
    pts = constellation.points
    xr, xi = pts.real, pts.imag
    # beta = 2 sum_{i<=2} (-x_i^R x_i^I + x_{i+2}^R x_{i+2}^I)
    bsign = np.array([-2.0, -2.0, 2.0, 2.0])
    out = []
    for i in range(4):
        cross = bsign[i] * xr * xi
        m = (y1[..., None] * (np.abs(pts) ** 2 + cross) + y2[..., None] * (np.abs(pts) ** 2 - cross)
             - (tU[0][..., i, None] + tU[1][..., i, None]) * xr
             - (tW[0][..., i, None] + tW[1][..., i, None]) * xi)
        out.append(np.argmin(m, axis=-1))
    return np.stack(out, axis=-1)


def decode_combined_boxed(Yp_pair, Yc_pair, constellation, a1_prev, a2_prev):
    """The combined decoder written with the explicit sign pattern.

    ``i = 1, 2``: ``(y1 + y2)|x|^2 - 2 (y1 - y2) x^R x^I - x^R (t1 + t2) + x^I (t1 - t2)``;
    ``i = 3, 4``: ``(y1 + y2)|x|^2 + 2 (y1 - y2) x^R x^I - x^R (t1 + t2) - x^I (t1 - t2)``.
    """
    y1, y2, t1, t2 = combined_statistics(Yp_pair, Yc_pair, a1_prev, a2_prev)
    pts = constellation.points
    xr, xi = pts.real, pts.imag
    ys, yd = (y1 + y2)[..., None], (y1 - y2)[..., None]
    out = []
    for i in range(4):
        s = -1.0 if i < 2 else 1.0
        ts, td = (t1 + t2)[..., i, None], (t1 - t2)[..., i, None]
        m = ys * np.abs(pts) ** 2 + s * 2 * yd * xr * xi - xr * ts - s * xi * td
        out.append(np.argmin(m, axis=-1))
    return np.stack(out, axis=-1)


def decode_combined_joint(Yp_pair, Yc_pair, constellation, a1_prev, a2_prev):
    """Brute-force joint search of the combined metric over all ``q^4`` blocks.

    Evaluates ``sum_k (a_k sqrt(p) / 2) ||Y^k_cur - V^k Y^k_prev / a_k||_F^2``
    directly on the candidate matrices (single block only).
    """
    pts = constellation.points
    idx = np.array(list(product(range(pts.size), repeat=4)), dtype=np.int64)
    V1, V2, _, _ = make_info_submatrices(QostbcKind.COMBINED, pts[idx], check=False)
    total = np.zeros(len(idx))
    for V, Yp, Yc, a in ((V1, Yp_pair.first, Yc_pair.first, a1_prev),
                         (V2, Yp_pair.second, Yc_pair.second, a2_prev)):
        D = Yc[None] - V @ Yp[None] / a
        total += a * np.sqrt(4.0) / 2 * np.sum(np.abs(D) ** 2, axis=(-2, -1))
    return idx[np.argmin(total)]


def decode_uncombined(Yp_pair, Yc_pair, rect_qam, a1_prev, a2_prev):
    """Real parts from subsystem 1, imaginary parts from subsystem 2.

    ``x^R = argmin y~_1 (x^R)^2 - x~^R x^R`` and
    ``x^I = argmin y~_2 (x^I)^2 - x~^I x^I``.

    Raises
    ------
    UnsupportedError
        For constellations that are not rectangular QAM.
    DegenerateBlockError
        If a previous subsystem amplitude is zero.
    """
    if not rect_qam.is_rectangular:
        raise UnsupportedError("uncombined decoding needs rectangular QAM")
    if np.any(np.asarray(a1_prev) <= 0) or np.any(np.asarray(a2_prev) <= 0):
        raise DegenerateBlockError("previous subsystem amplitude is zero")
    U, W = _dispersion(QostbcKind.UNCOMBINED)
    R1, y1 = _stats(Yp_pair.first, Yc_pair.first, a1_prev, 2.0)
    R2, y2 = _stats(Yp_pair.second, Yc_pair.second, a2_prev, 2.0)
    tr_, ti_ = _tr_re(R1, U[0]), _tr_re(R2, W[1])
    lr, li = rect_qam.meta["levels_re"], rect_qam.meta["levels_im"]
    r = np.argmin(y1[..., None, None] * lr ** 2 - tr_[..., None] * lr, axis=-1)
    m = np.argmin(y2[..., None, None] * li ** 2 - ti_[..., None] * li, axis=-1)
    return r * len(li) + m


def uncombined_search_size(rect_qam, K=4):
    """One-dimensional alphabet sizes times two times ``K``."""
    if not rect_qam.is_rectangular:
        raise UnsupportedError("uncombined decoding needs rectangular QAM")
    return K * (len(rect_qam.meta["levels_re"]) + len(rect_qam.meta["levels_im"]))


def actual_info_symbols(c, a1_prev, a2_prev, p):
    """``v'_1..v'_4`` of the equivalent single-system information matrix."""
    c = np.asarray(c, dtype=np.complex128)
    a1_prev, a2_prev = np.asarray(a1_prev, dtype=float), np.asarray(a2_prev, dtype=float)
    if np.any(a1_prev <= 0) or np.any(a2_prev <= 0):
        raise DegenerateBlockError("previous subsystem amplitude is zero")
    u = c[..., 0] / a1_prev, c[..., 1] / a1_prev
    w = c[..., 2] / a2_prev, c[..., 3] / a2_prev
    k = 1.0 / (2.0 * np.sqrt(p))
    return np.stack([k * (u[0] + w[0]), k * (u[1] + w[1]), k * (u[0] - w[0]), k * (u[1] - w[1])], axis=-1)


def actual_info_matrix(c, a1_prev, a2_prev, p):
    """ABBA matrix ``V'`` with ``S_tau = V' S_{tau-1}`` in the original system.

    Parameters
    ----------
    c : array_like, shape (..., 4)
        Subsystem symbols ``c_1..c_4``.
    a1_prev, a2_prev : float
        Previous subsystem amplitudes.
    p : float
        Subsystem normalization.
    """
    v = actual_info_symbols(c, a1_prev, a2_prev, p)
    return abba_from_subsystems(*_ab_to_sums(_alamouti(v[..., 0], v[..., 1]), _alamouti(v[..., 2], v[..., 3])))


def _ab_to_sums(A, B):
    return A + B, A - B
