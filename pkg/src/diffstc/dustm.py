"""Differential unitary space-time modulation with cyclic diagonal codes.

The codebook is the cyclic group ``{G^l, l = 0..L-1}`` generated by
``G = diag(exp(j 2 pi u_m / L))``.  Because the group is cyclic the
differential encoder reduces to index arithmetic,
``x_tau = (z_tau + x_{tau-1}) mod L`` with transmitted block ``G^{x_tau}``.

The squared distance matrix between ``V_l`` and the identity has the
eigenvalues ``4 sin^2(pi l u_m / L)``, which gives the closed-form coding
gain used by the exhaustive ``u`` search.
"""

from dataclasses import dataclass
from itertools import combinations_with_replacement
from math import comb, gcd

import numpy as np

from .errors import CapacityError, ParameterError

#: largest number of u candidates :func:`search_u` scans exhaustively
SEARCH_GUARD = 2 ** 24

#: optimal u vectors for (M, eta): codebook size L = 2**(eta M)
TABLE_U = {
    (1, 1): (1,), (2, 1): (1, 1), (3, 1): (1, 1, 3), (4, 1): (1, 3, 5, 7),
    (5, 1): (1, 5, 7, 9, 11),
    (1, 2): (1,), (2, 2): (1, 7), (3, 2): (1, 11, 27), (4, 2): (1, 25, 97, 107),
    (5, 2): (1, 157, 283, 415, 487),
}


@dataclass(frozen=True, eq=False)
class CyclicCode:
    """Diagonal cyclic group code.

    Attributes
    ----------
    M : int
    L : int
    u : tuple of int
    G : ndarray, shape (M, M)
        Diagonal generator.
    """

    M: int
    L: int
    u: tuple
    G: np.ndarray

    def power(self, l):
        """``G^l`` computed from the exact phase ``2 pi (l u_m mod L) / L``."""
        return np.diag(self.diag_power(l))

    def diag_power(self, l):
        """Diagonal of ``G^l``; `l` may be an array (result shape ``l.shape + (M,)``)."""
        l = np.asarray(l, dtype=np.int64)
        k = (l[..., None] * np.asarray(self.u, dtype=np.int64)) % self.L
        return np.exp(2j * np.pi * k / self.L)

    def codebook(self):
        """All codewords, shape (L, M, M)."""
        d = self.diag_power(np.arange(self.L))
        return d[:, :, None] * np.eye(self.M)[None]


def make_cyclic(u, L):
    """Build the cyclic code with generator ``diag(exp(j 2 pi u / L))``."""
    L = int(L)
    u = tuple(int(v) for v in np.atleast_1d(u))
    if L < 2:
        raise ParameterError("codebook size must be at least 2")
    if any(not 0 <= v < L for v in u):
        raise ParameterError("u entries must lie in [0, L)")
    G = np.diag(np.exp(2j * np.pi * np.array(u) / L))
    return CyclicCode(len(u), L, u, G)


def encode_index(z, x_prev, L):
    """Differential state update ``(z + x_prev) mod L`` (vectorized)."""
    z = np.asarray(z)
    x_prev = np.asarray(x_prev)
    if np.any((z < 0) | (z >= L)) or np.any((x_prev < 0) | (x_prev >= L)):
        raise ParameterError("indices must lie in [0, L)")
    r = (z + x_prev) % L
    return int(r) if r.ndim == 0 else r


def coding_gain_u(u, L):
    """``min_l (prod_m 4 sin^2(pi l u_m / L))^(1/M)`` over ``l = 1..L-1``."""
    u = np.atleast_1d(np.asarray(u, dtype=np.int64))
    l = np.arange(1, int(L), dtype=np.int64)
    k = (l[:, None] * u[None, :]) % L
    lam = 4.0 * np.sin(np.pi * k / L) ** 2
    lam[k == 0] = 0.0
    return float(np.min(np.prod(lam, axis=1)) ** (1.0 / u.size))


def _gain_batch(U, L):
    # U: (C, M) candidates -> coding gain per candidate
    l = np.arange(1, L, dtype=np.int64)
    k = (l[None, :, None] * U[:, None, :]) % L
    lam = 4.0 * np.sin(np.pi * k / L) ** 2
    lam[k == 0] = 0.0
    return np.min(np.prod(lam, axis=2), axis=1) ** (1.0 / U.shape[1])


def search_u(M, L, coprime_only=True, chunk=4096):
    """Exhaustive search for the ``u`` maximizing the coding gain.

    The space is reduced by fixing ``u_1 = 1`` and scanning only sorted
    tails (the gain is invariant under permutations of ``u`` and under
    multiplying ``u`` by a unit of ``Z_L``).  With `coprime_only`, entries
    are restricted to values relatively prime to ``L``.

    Returns
    -------
    dict
        ``{"M", "L", "u", "coding_gain", "candidates_scanned"}``; ties go to
        the lexicographically smallest ``u``.
    """
    M, L = int(M), int(L)
    if M < 1 or L < 2:
        raise ParameterError("need M >= 1 and L >= 2")
    values = [v for v in range(1, L) if not coprime_only or gcd(v, L) == 1]
    n_tails = comb(len(values) + M - 2, M - 1)
    if n_tails > SEARCH_GUARD:
        raise CapacityError(f"u search over L={L}, M={M} exceeds guard ({n_tails} candidates)")
    tails = list(combinations_with_replacement(values, M - 1)) if M > 1 else [()]
    best_u, best_cg = None, -1.0
    for start in range(0, len(tails), chunk):
        U = np.array([(1,) + t for t in tails[start:start + chunk]], dtype=np.int64).reshape(-1, M)
        cg = _gain_batch(U, L)
        i = int(np.flatnonzero(cg >= cg.max() - 1e-12)[0])
        if cg[i] > best_cg + 1e-12:
            best_cg, best_u = float(cg[i]), tuple(int(v) for v in U[i])
    return {"M": M, "L": L, "u": list(best_u), "coding_gain": best_cg,
            "candidates_scanned": len(tails)}


def dustm_metric(Y_prev, Y_cur, code, form="trace"):
    """Decision metric of every codeword, shape ``batch + (L,)``.

    ``form="trace"`` evaluates ``Re tr(V_l Y_prev Y_cur^H)``; ``form="norm"``
    evaluates ``||Y_prev + V_l^H Y_cur||_F^2``.  Both have the same argmax.
    """
    Yp = np.asarray(Y_prev, dtype=np.complex128)
    Yc = np.asarray(Y_cur, dtype=np.complex128)
    D = code.diag_power(np.arange(code.L))  # (L, M)
    if form == "trace":
        r = np.sum(Yp * Yc.conj(), axis=-1)  # diag of Yp Yc^H, shape (..., M)
        return np.real(r @ D.T)
    Z = Yp[..., None, :, :] + D.conj()[:, :, None] * Yc[..., None, :, :]
    return np.sum(np.abs(Z) ** 2, axis=(-1, -2))


def dustm_ml_decode(Y_prev, Y_cur, code, check=False):
    """ML differential decision ``argmax_l ||Y_prev + V_l^H Y_cur||_F^2``.

    Works on single ``M x N`` blocks or on batches ``(..., M, N)``.  With
    `check`, the trace form is evaluated as well and both winners are
    asserted equal.
    """
    m = dustm_metric(Y_prev, Y_cur, code, form="norm")
    win = np.argmax(m, axis=-1)
    if check:
        alt = np.argmax(dustm_metric(Y_prev, Y_cur, code, form="trace"), axis=-1)
        assert np.array_equal(win, alt), "metric forms disagree"
    return int(win) if np.ndim(win) == 0 else win


def complementary_bitmap(L):
    """Labels with ``label(l + L/2) == ~label(l)``; first half in natural binary."""
    L = int(L)
    if L < 2 or L & (L - 1):
        raise ParameterError("L must be a power of two >= 2")
    n = L.bit_length() - 1
    first = [format(l, f"0{n}b") for l in range(L // 2)]
    flip = str.maketrans("01", "10")
    return first + [s.translate(flip) for s in first]


def table_u(M, eta):
    """Published optimum ``u`` for ``(M, eta)`` and its codebook size."""
    try:
        return list(TABLE_U[(int(M), int(eta))]), 2 ** (int(eta) * int(M))
    except KeyError as exc:
        raise ParameterError(f"no tabulated u for M={M}, eta={eta}") from exc
