"""Space-time block code descriptors.

A code with ``K`` complex symbols per ``T x M`` block is written in the
dispersion forms

    V = 1/sqrt(p) * sum_i (A_i x_i + B_i conj(x_i))
      = 1/sqrt(p) * sum_i (U_i Re(x_i) + j Q_i Im(x_i)),

so ``U_i = A_i + B_i`` and ``Q_i = A_i - B_i`` (equivalently
``A_i = (U_i + Q_i) / 2``, ``B_i = (U_i - Q_i) / 2``).  Rows index time
slots, columns transmit antennas.

Implemented codes: Alamouti (2x2, K=2), the Tirkkonen-Hottinen rate-3/4
code (4x4, K=3) and the minimum-decoding-complexity quasi-orthogonal
codes obtained from them by :func:`mdc_extend` (4x4, K=4 and 8x8, K=6).

``U`` and ``Q`` have entries in {0, +-1, +-j}; every structural check runs
on these small Gaussian integers, which are represented exactly in
floating point, so the validators compare with ``==``.
"""

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from itertools import product

import numpy as np

from .errors import ContractError, ParameterError, UnsupportedError, CapacityError

#: largest codebook :func:`codebook` will enumerate
CODEBOOK_GUARD = 2 ** 16


class CodeKind(str, Enum):
    ALAMOUTI = "ALAMOUTI"
    TH4 = "TH4"
    MDC4 = "MDC4"
    MDC8 = "MDC8"


@dataclass(frozen=True, eq=False)
class STCode:
    """Dispersion-matrix description of a space-time block code.

    Attributes
    ----------
    kind : CodeKind
    M, T, K : int
        Transmit antennas, time slots and symbols per block.
    U, Q : ndarray, shape (K, T, M)
        Real-part and imaginary-part dispersion matrices.
    p : float
        Normalization constant (equal to ``K`` for all implemented codes).
    """

    kind: CodeKind
    M: int
    T: int
    K: int
    U: np.ndarray
    Q: np.ndarray
    p: float

    def __post_init__(self):
        for name in ("U", "Q"):
            arr = np.array(getattr(self, name), dtype=np.complex128)
            if arr.shape != (self.K, self.T, self.M):
                raise ContractError(f"{name} must have shape {(self.K, self.T, self.M)}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def A(self):
        return (self.U + self.Q) / 2

    @property
    def B(self):
        return (self.U - self.Q) / 2

    def to_json(self):
        """Dispersion matrices as integer triples ``[row, col, re, im]`` lists."""
        def triples(mats):
            return [[[int(r), int(c), int(m[r, c].real), int(m[r, c].imag)]
                     for r, c in zip(*np.nonzero(m))] for m in mats]
        return {"kind": self.kind.value, "M": self.M, "T": self.T, "K": self.K,
                "p": self.p, "U": triples(self.U), "Q": triples(self.Q)}


def _from_ab(kind, A, B, p):
    A = np.asarray(A, dtype=np.complex128)
    B = np.asarray(B, dtype=np.complex128)
    K, T, M = A.shape
    return STCode(CodeKind(kind), M, T, K, A + B, A - B, float(p))


def _alamouti():
    A = np.zeros((2, 2, 2))
    B = np.zeros((2, 2, 2))
    A[0, 0, 0] = 1
    B[0, 1, 1] = 1
    A[1, 0, 1] = 1
    B[1, 1, 0] = -1
    return _from_ab(CodeKind.ALAMOUTI, A, B, 2)


def _th4():
    A = np.zeros((3, 4, 4))
    B = np.zeros((3, 4, 4))
    A[0, 0, 0] = A[0, 3, 3] = 1
    B[0, 1, 1] = B[0, 2, 2] = 1
    A[1, 0, 1] = A[1, 2, 3] = 1
    B[1, 1, 0] = B[1, 3, 2] = -1
    A[2, 0, 2] = 1
    A[2, 1, 3] = -1
    B[2, 2, 0] = -1
    B[2, 3, 1] = 1
    return _from_ab(CodeKind.TH4, A, B, 3)


def mdc_extend(base, kind=None):
    """Double a square orthogonal code into a minimum-decoding-complexity QOSTBC.

    With ``Ub, Qb`` the base matrices and ``1 <= i <= K``::

        U_i     = [[Ub_i, 0], [0, Ub_i]]      Q_i     = [[0, j Ub_i], [j Ub_i, 0]]
        U_{i+K} = [[j Qb_i, 0], [0, j Qb_i]]  Q_{i+K} = [[0, Qb_i], [Qb_i, 0]]

    Raises
    ------
    ContractError
        If `base` is not square or fails :func:`validate_ostbc`.
    """
    if base.M != base.T or not all(validate_ostbc(base).values()):
        raise ContractError("mdc_extend needs a square orthogonal base code")
    Kb, n = base.K, base.M
    Z = np.zeros((n, n), dtype=np.complex128)
    U, Q = [], []
    for i in range(Kb):
        U.append(np.block([[base.U[i], Z], [Z, base.U[i]]]))
        Q.append(np.block([[Z, 1j * base.U[i]], [1j * base.U[i], Z]]))
    for i in range(Kb):
        U.append(np.block([[1j * base.Q[i], Z], [Z, 1j * base.Q[i]]]))
        Q.append(np.block([[Z, base.Q[i]], [base.Q[i], Z]]))
    if kind is None:
        kind = {CodeKind.ALAMOUTI: CodeKind.MDC4, CodeKind.TH4: CodeKind.MDC8}.get(base.kind)
        if kind is None:
            raise ContractError(f"no MDC kind registered for base {base.kind.value}")
    return STCode(CodeKind(kind), 2 * n, 2 * n, 2 * Kb, np.array(U), np.array(Q), float(2 * Kb))


def make_code(kind):
    """Return one of the implemented codes by kind tag."""
    kind = CodeKind(kind if not isinstance(kind, str) else kind.upper())
    if kind is CodeKind.ALAMOUTI:
        return _alamouti()
    if kind is CodeKind.TH4:
        return _th4()
    if kind is CodeKind.MDC4:
        return mdc_extend(_alamouti())
    return mdc_extend(_th4())


def assemble(code, symbols):
    """Code matrix ``V`` from the U/Q dispersion form.

    Parameters
    ----------
    symbols : array_like, shape (..., K)

    Returns
    -------
    ndarray, shape (..., T, M)
    """
    x = np.asarray(symbols, dtype=np.complex128)
    if x.shape[-1:] != (code.K,):
        raise ParameterError(f"{code.kind.value} takes {code.K} symbols per block")
    V = np.einsum("...k,ktm->...tm", x.real, code.U) + 1j * np.einsum("...k,ktm->...tm", x.imag, code.Q)
    return V / np.sqrt(code.p)


def assemble_ab(code, symbols):
    """Code matrix ``V`` from the A/B (symbol / conjugate) dispersion form."""
    x = np.asarray(symbols, dtype=np.complex128)
    if x.shape[-1:] != (code.K,):
        raise ParameterError(f"{code.kind.value} takes {code.K} symbols per block")
    V = np.einsum("...k,ktm->...tm", x, code.A) + np.einsum("...k,ktm->...tm", x.conj(), code.B)
    return V / np.sqrt(code.p)


def _h(m):
    return np.conj(np.swapaxes(m, -1, -2))


def validate_ostbc(code):
    """Check the orthogonal-design properties of the dispersion matrices.

    Returns
    -------
    dict
        ``unit``: ``U_i^H U_i == Q_i^H Q_i == I`` for all i;
        ``anticommute``: ``U_i^H U_d == -U_d^H U_i`` and the same for Q, i != d;
        ``cross_hermitian``: ``U_i^H Q_d == Q_d^H U_i`` for all i, d.
    """
    U, Q, K = code.U, code.Q, code.K
    eye = np.eye(code.M)
    unit = all(np.array_equal(_h(U[i]) @ U[i], eye) and np.array_equal(_h(Q[i]) @ Q[i], eye)
               for i in range(K))
    anti = all(np.array_equal(_h(U[i]) @ U[d], -(_h(U[d]) @ U[i]))
               and np.array_equal(_h(Q[i]) @ Q[d], -(_h(Q[d]) @ Q[i]))
               for i in range(K) for d in range(K) if i != d)
    cross = all(np.array_equal(_h(U[i]) @ Q[d], _h(Q[d]) @ U[i]) for i in range(K) for d in range(K))
    return {"unit": unit, "anticommute": anti, "cross_hermitian": cross}


def validate_mdc(code):
    """Check the minimum-decoding-complexity quasi-orthogonality constraints.

    Returns
    -------
    dict
        ``anticommute_U`` / ``anticommute_Q`` / ``cross_hermitian``: the
        orthogonal-design relations restricted to ``i != d``;
        ``unit``: every ``U_i`` and ``Q_i`` unitary;
        ``coupling``: ``U_i^H Q_i = -Q_i^H U_i = Q_{i+K/2}^H U_{i+K/2}
        = -U_{i+K/2}^H Q_{i+K/2} = j [[0, I], [I, 0]]`` for ``i <= K/2``.
    """
    U, Q, K, M = code.U, code.Q, code.K, code.M
    pairs = [(i, d) for i in range(K) for d in range(K) if i != d]
    rep = {
        "anticommute_U": all(np.array_equal(_h(U[i]) @ U[d], -(_h(U[d]) @ U[i])) for i, d in pairs),
        "anticommute_Q": all(np.array_equal(_h(Q[i]) @ Q[d], -(_h(Q[d]) @ Q[i])) for i, d in pairs),
        "cross_hermitian": all(np.array_equal(_h(U[i]) @ Q[d], _h(Q[d]) @ U[i]) for i, d in pairs),
        "unit": all(np.array_equal(_h(U[i]) @ U[i], np.eye(M)) and np.array_equal(_h(Q[i]) @ Q[i], np.eye(M))
                    for i in range(K)),
    }
    if M % 2 or K % 2:
        rep["coupling"] = False
        return rep
    h = M // 2
    J = 1j * np.block([[np.zeros((h, h)), np.eye(h)], [np.eye(h), np.zeros((h, h))]])
    ok = True
    for i in range(K // 2):
        k = i + K // 2
        for lhs in (_h(U[i]) @ Q[i], -(_h(Q[i]) @ U[i]), _h(Q[k]) @ U[k], -(_h(U[k]) @ Q[k])):
            ok &= bool(np.array_equal(lhs, J))
    rep["coupling"] = ok
    return rep


@dataclass(frozen=True)
class GramForm:
    """``alpha = sum |x_i|^2`` and ``beta = 2 sum_{i<=K/2} (-x_i^R x_i^I + x_{i+K/2}^R x_{i+K/2}^I)``."""

    alpha: float
    beta: float


def gram_coefficients(symbols):
    """Vectorized ``(alpha, beta)`` over the last axis of `symbols`."""
    x = np.asarray(symbols, dtype=np.complex128)
    h = x.shape[-1] // 2
    alpha = np.sum(np.abs(x) ** 2, axis=-1)
    beta = 2 * np.sum(-x[..., :h].real * x[..., :h].imag + x[..., h:].real * x[..., h:].imag, axis=-1)
    return alpha, beta


def gram(code, symbols):
    """Gram matrix of an MDC code matrix and its closed form.

    Returns
    -------
    (GramForm, ndarray, ndarray)
        The coefficients, the product ``V^H V`` and the closed form
        ``(alpha I + beta [[0, I], [I, 0]]) / K``.

    Raises
    ------
    UnsupportedError
        For codes that are not MDC extensions.
    """
    if code.kind not in (CodeKind.MDC4, CodeKind.MDC8):
        raise UnsupportedError("Gram closed form applies to MDC codes only")
    V = assemble(code, symbols)
    alpha, beta = gram_coefficients(symbols)
    h = code.M // 2
    X = np.block([[np.zeros((h, h)), np.eye(h)], [np.eye(h), np.zeros((h, h))]])
    closed = (alpha * np.eye(code.M) + beta * X) / code.K
    return GramForm(float(alpha), float(beta)), _h(V) @ V, closed


def rate_and_efficiency(code, alphabet_sizes):
    """Code rate ``K/T`` and spectral efficiency ``sum log2 q_i / T`` as fractions."""
    sizes = list(alphabet_sizes)
    if len(sizes) != code.K:
        raise ParameterError(f"expected {code.K} alphabet sizes")
    bits = 0
    for q in sizes:
        if q < 2 or q & (q - 1):
            raise ParameterError("alphabet sizes must be powers of two")
        bits += int(q).bit_length() - 1
    return Fraction(code.K, code.T), Fraction(bits, code.T)


def codebook(code, alphabets):
    """All code matrices for per-symbol alphabets (symbol 1 most significant).

    Parameters
    ----------
    alphabets : sequence of Constellation, length K (or one, reused)

    Returns
    -------
    (ndarray, ndarray)
        Matrices of shape (L, T, M) and symbol index tuples of shape (L, K).
    """
    alph = list(alphabets) if isinstance(alphabets, (list, tuple)) else [alphabets] * code.K
    if len(alph) == 1:
        alph = alph * code.K
    L = int(np.prod([a.size for a in alph]))
    if L > CODEBOOK_GUARD:
        raise CapacityError(f"codebook of {L} matrices exceeds guard {CODEBOOK_GUARD}")
    idx = np.array(list(product(*[range(a.size) for a in alph])), dtype=np.int64)
    x = np.stack([alph[k].points[idx[:, k]] for k in range(code.K)], axis=-1)
    return assemble(code, x), idx
