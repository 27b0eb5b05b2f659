"""Differential orthogonal space-time block codes.

Blocks are ``M x M`` (time x antenna).  The unitary path transmits
``S_tau = V S_{tau-1}`` with unitary ``V``; the non-unitary path divides by
the amplitude of the previous information matrix,
``S_tau = V S_{tau-1} / a_{tau-1}``, so that ``S_tau^H S_tau = V^H V``.

All decoders work on single blocks ``(M, N)`` or on batches
``(..., M, N)``.  With ``R = Y_prev Y_cur^H`` the per-symbol statistic is

    x~_i = tr(A_i R) + conj(tr(B_i R)),

so that ``Re tr(V R) = sum_i Re(x_i x~_i) / sqrt(p)``.

Alphabets may be given per symbol (mixed alphabets such as 4/8/8 PSK);
symbol 1 is the most significant digit of every joint index.
"""

from dataclasses import dataclass

import numpy as np

from . import cxmat
from .errors import CapacityError, ContractError, ParameterError, UnsupportedError
from .stcodes import CODEBOOK_GUARD, assemble, codebook

#: tolerance on the (scaled) unitarity of information matrices
UNITARY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class DiffState:
    """Last transmitted block and the amplitude of the last information matrix."""

    S_prev: np.ndarray
    a_prev: float = 1.0

    @classmethod
    def initial(cls, M):
        return cls(np.eye(M, dtype=np.complex128), 1.0)


def _alphabets(code, constellation):
    alph = list(constellation) if isinstance(constellation, (list, tuple)) else [constellation]
    if len(alph) == 1:
        alph = alph * code.K
    if len(alph) != code.K:
        raise ParameterError(f"expected {code.K} alphabets, got {len(alph)}")
    return alph


def _h(m):
    return np.conj(np.swapaxes(m, -1, -2))


def encode_unitary(V, state):
    """``S_new = V S_prev`` for unitary `V`.

    Raises
    ------
    ContractError
        If `V` is not unitary to :data:`UNITARY_TOL`.
    """
    ok, c = cxmat.is_scaled_unitary(V, UNITARY_TOL)
    if not ok or abs(c - 1.0) > UNITARY_TOL:
        raise ContractError("information matrix is not unitary")
    S = np.asarray(V, dtype=np.complex128) @ state.S_prev
    return S, DiffState(S, 1.0)


def encode_nonunitary(V, state):
    """``S_new = V S_prev / a_prev`` for scaled-unitary ``V^H V = a^2 I``.

    Raises
    ------
    ContractError
        If `V` is not scaled unitary.
    """
    ok, c = cxmat.is_scaled_unitary(V, UNITARY_TOL)
    if not ok or c <= 0:
        raise ContractError("information matrix is not scaled unitary")
    S = np.asarray(V, dtype=np.complex128) @ state.S_prev / state.a_prev
    return S, DiffState(S, float(np.sqrt(c)))


def encode_sequence(V, unitary=True):
    """Differentially encode a batch of information matrices.

    Parameters
    ----------
    V : ndarray, shape (..., n, M, M)
    unitary : bool
        Skip the amplitude division (it equals one for unitary blocks).

    Returns
    -------
    (ndarray, ndarray)
        Transmitted blocks including the identity reference, shape
        (..., n + 1, M, M), and the information amplitudes ``a_tau`` with
        ``a_0 = 1``, shape (..., n + 1).
    """
    V = np.asarray(V, dtype=np.complex128)
    n, M = V.shape[-3], V.shape[-1]
    amp = np.sqrt(np.real(np.sum(np.abs(V) ** 2, axis=(-2, -1))) / M)
    S = np.empty(V.shape[:-3] + (n + 1, M, M), dtype=np.complex128)
    S[..., 0, :, :] = np.eye(M)
    a = np.ones(V.shape[:-3] + (n + 1,))
    a[..., 1:] = amp
    for t in range(n):
        S[..., t + 1, :, :] = V[..., t, :, :] @ S[..., t, :, :]
        if not unitary:
            S[..., t + 1, :, :] /= a[..., t, None, None]
    return S, a


def xtilde(Y_prev, Y_cur, code):
    """Per-symbol statistics ``x~_i``, shape (..., K)."""
    R = np.asarray(Y_prev) @ _h(np.asarray(Y_cur))
    tA = np.einsum("kij,...ji->...k", code.A, R)
    tB = np.einsum("kij,...ji->...k", code.B, R)
    return tA + np.conj(tB)


def decode_fast_ml_unitary(Y_prev, Y_cur, code, constellation):
    """Symbol-wise ML decision ``argmax_x Re{x~_i x}`` for PSK alphabets.

    Returns
    -------
    ndarray of int, shape (..., K)
    """
    alph = _alphabets(code, constellation)
    if not all(a.is_constant_envelope for a in alph):
        raise UnsupportedError("fast ML decoding needs constant-envelope alphabets")
    xt = xtilde(Y_prev, Y_cur, code)
    return np.stack([np.argmax(np.real(xt[..., i, None] * a.points), axis=-1)
                     for i, a in enumerate(alph)], axis=-1)


def _penalty(Y_prev, code, a_prev):
    yt = np.real(np.sum(np.abs(np.asarray(Y_prev)) ** 2, axis=(-2, -1)))
    return yt / (2.0 * np.asarray(a_prev, dtype=float) * np.sqrt(code.p))


def decode_near_optimal(Y_prev, Y_cur, code, constellation, a_prev):
    """Decoupled decision ``argmax Re{x~_i x} - y~ / (2 a_prev sqrt(K)) |x|^2``."""
    if np.any(np.asarray(a_prev) <= 0):
        raise ParameterError("a_prev must be positive")
    alph = _alphabets(code, constellation)
    xt = xtilde(Y_prev, Y_cur, code)
    c = _penalty(Y_prev, code, a_prev)[..., None]
    return np.stack([np.argmax(np.real(xt[..., i, None] * a.points) - c * np.abs(a.points) ** 2, axis=-1)
                     for i, a in enumerate(alph)], axis=-1)


def srsd_search_size(code, constellation):
    """``(single-real-symbol candidates, symbol-wise candidates)`` per block."""
    alph = _alphabets(code, constellation)
    for a in alph:
        if not a.is_rectangular:
            raise UnsupportedError("single real symbol decoding needs rectangular QAM")
    return (sum(len(a.meta["levels_re"]) + len(a.meta["levels_im"]) for a in alph),
            sum(a.size for a in alph))


def decode_srsd(Y_prev, Y_cur, code, rect_qam, a_prev):
    """Decide real and imaginary parts of every symbol separately.

    ``x^R = argmax x~^R x^R - c (x^R)^2`` and
    ``x^I = argmax -x~^I x^I - c (x^I)^2`` with ``c = y~ / (2 a_prev sqrt(K))``.
    """
    alph = _alphabets(code, rect_qam)
    srsd_search_size(code, alph)
    xt = xtilde(Y_prev, Y_cur, code)
    c = _penalty(Y_prev, code, a_prev)[..., None]
    out = []
    for i, a in enumerate(alph):
        lr, li = a.meta["levels_re"], a.meta["levels_im"]
        r = np.argmax(xt[..., i, None].real * lr - c * lr ** 2, axis=-1)
        m = np.argmax(-xt[..., i, None].imag * li - c * li ** 2, axis=-1)
        out.append(r * len(li) + m)
    return np.stack(out, axis=-1)


def _joint_codebook(code, alph):
    L = int(np.prod([a.size for a in alph]))
    if L > CODEBOOK_GUARD:
        raise CapacityError(f"joint search over {L} candidates exceeds guard {CODEBOOK_GUARD}")
    return codebook(code, alph)


def decode_ml_nonunitary(Y_prev, Y_cur, code, constellation, rho, a_prev):
    """Joint ML decision for scaled-unitary information matrices.

    Maximizes ``rho / (1 + rho (a_prev^2 + a_l^2)) ||a_prev Y_prev + V_l^H Y_cur||^2
    - M N ln(1 + rho (a_prev^2 + a_l^2))`` over the whole codebook.

    Returns
    -------
    ndarray of int, shape (..., K)
    """
    if rho <= 0:
        raise ParameterError("rho must be positive")
    alph = _alphabets(code, constellation)
    Vs, idx = _joint_codebook(code, alph)
    Yp = np.asarray(Y_prev, dtype=np.complex128)
    Yc = np.asarray(Y_cur, dtype=np.complex128)
    M, N = Yp.shape[-2:]
    a = np.asarray(a_prev, dtype=float)[..., None]
    al2 = np.real(np.sum(np.abs(Vs) ** 2, axis=(-2, -1))) / M  # a_l^2
    R = Yp @ _h(Yc)
    # ||a Yp + V^H Yc||^2 = a^2 ||Yp||^2 + a_l^2 ||Yc||^2 + 2 a Re tr(V R)
    trVR = np.real(R.reshape(R.shape[:-2] + (M * M,)) @ np.swapaxes(Vs, -1, -2).reshape(len(Vs), M * M).T)
    nYp = np.sum(np.abs(Yp) ** 2, axis=(-2, -1))[..., None]
    nYc = np.sum(np.abs(Yc) ** 2, axis=(-2, -1))[..., None]
    g = 1.0 + rho * (a ** 2 + al2)
    metric = rho / g * (a ** 2 * nYp + al2 * nYc + 2.0 * a * trVR) - M * N * np.log(g)
    return idx[np.argmax(metric, axis=-1)]


def decode_matrix_ml_general(Y_prev, Y_cur, candidates, rho):
    """Reference two-block ML decision over explicit candidates.

    Evaluates ``tr{rho Y^H S (I + rho S^H S)^-1 S^H Y} - N ln det(I + rho S^H S)``
    with ``Y = [Y_prev; Y_cur]`` and ``S`` each ``2M x M`` candidate, one
    candidate at a time with the in-house matrix routines.

    Returns
    -------
    int
        Index of the winning candidate (lowest index on ties).
    """
    cands = list(candidates)
    if not cands:
        raise ParameterError("candidate list is empty")
    Y = cxmat.as_cmatrix(np.vstack([Y_prev, Y_cur]))
    N = Y.shape[1]
    best, best_i = -np.inf, 0
    for i, S in enumerate(cands):
        S = cxmat.as_cmatrix(S)
        G = cxmat.identity(S.shape[1]) + rho * cxmat.matmul(cxmat.hermitian(S), S)
        P = cxmat.matmul(cxmat.hermitian(Y), S)
        quad = rho * cxmat.trace(cxmat.matmul(cxmat.matmul(P, cxmat.inverse(G)), cxmat.hermitian(P))).real
        val = quad - N * np.log(abs(cxmat.determinant(G)))
        if val > best:
            best, best_i = val, i
    return best_i


def two_block_candidates(code, constellation, S_prev=None, a_prev=1.0):
    """Candidate stacks ``[S_prev; V_l S_prev / a_prev]`` for every codeword."""
    alph = _alphabets(code, constellation)
    Vs, idx = _joint_codebook(code, alph)
    S0 = np.eye(code.M) if S_prev is None else np.asarray(S_prev)
    return [np.vstack([S0, V @ S0 / a_prev]) for V in Vs], idx


def symbols_from_indices(code, constellation, idx):
    """Complex symbols (..., K) for per-symbol point indices."""
    alph = _alphabets(code, constellation)
    idx = np.asarray(idx)
    return np.stack([a.points[idx[..., k]] for k, a in enumerate(alph)], axis=-1)


def info_matrices(code, constellation, idx):
    """Information matrices for per-symbol indices, shape (..., M, M)."""
    return assemble(code, symbols_from_indices(code, constellation, idx))
