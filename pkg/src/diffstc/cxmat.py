"""Small dense complex matrix kernel.

A ``CMatrix`` is represented as a two-dimensional ``numpy`` array of
dtype ``complex128``.  The helpers here add the shape checks and the
spectral / determinant / rank operations that the code design criteria
rely on.  Eigenvalues and singular values are computed with cyclic
Jacobi sweeps and determinants with a pivoted LU factorization, so the
design-criterion code paths are independent of LAPACK and can be
cross-checked against it in the tests.

The matrices met in practice are at most 8x8, so the kernels favour
accuracy and simplicity over asymptotic speed.  Monte Carlo hot loops
use batched ``numpy`` arithmetic directly instead of these routines.
"""

import numpy as np

from .errors import ContractError, ShapeError, SingularityError

#: relative singular value threshold used by :func:`rank`
RANK_RTOL = 1e-9
#: absolute tolerance for the Hermitian precondition of :func:`eig_hermitian`
HERMITIAN_TOL = 1e-10
#: largest admissible condition number for :func:`inverse`
COND_MAX = 1e12
#: off-diagonal convergence threshold of the Jacobi sweeps (relative)
JACOBI_TOL = 1e-15
#: hard cap on Jacobi sweeps; convergence is quadratic so this is never hit
JACOBI_MAX_SWEEPS = 60

CMatrix = np.ndarray


def as_cmatrix(a):
    """Return `a` as a finite ``complex128`` 2-D array.

    Raises
    ------
    ShapeError
        If `a` is not two-dimensional or has an empty dimension.
    ContractError
        If any entry is NaN or infinite.
    """
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ContractError("matrix has non-finite entries")
    return m


def _square(a):
    m = as_cmatrix(a)
    if m.shape[0] != m.shape[1]:
        raise ShapeError(f"square matrix required, got shape {m.shape}")
    return m


def identity(n):
    """The ``n x n`` complex identity."""
    return np.eye(n, dtype=np.complex128)


def matmul(a, b):
    """Complex matrix product ``a @ b`` with a dimension check."""
    a = as_cmatrix(a)
    b = as_cmatrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def hermitian(a):
    """Conjugate transpose."""
    return as_cmatrix(a).conj().T


def trace(a):
    """Sum of the main diagonal of a square matrix."""
    return complex(np.trace(_square(a)))


def frobenius_norm_sq(a):
    """Squared Frobenius norm, i.e. the sum of squared entry magnitudes."""
    m = as_cmatrix(a)
    return float(np.sum(m.real ** 2 + m.imag ** 2))


def determinant(a):
    """Determinant by LU factorization with partial pivoting.

    Parameters
    ----------
    a : array_like
        Square complex matrix.

    Returns
    -------
    complex
    """
    lu = _square(a).copy()
    n = lu.shape[0]
    det = 1.0 + 0.0j
    for k in range(n):
        piv = k + int(np.argmax(np.abs(lu[k:, k])))
        if lu[piv, k] == 0:
            return 0j
        if piv != k:
            lu[[k, piv]] = lu[[piv, k]]
            det = -det
        det *= lu[k, k]
        if k + 1 < n:
            f = lu[k + 1:, k] / lu[k, k]
            lu[k + 1:, k:] -= np.outer(f, lu[k, k:])
    return complex(det)


def _real_embedding(m):
    # [[Re, -Im], [Im, Re]] has the spectrum of m with every value doubled
    return np.block([[m.real, -m.imag], [m.imag, m.real]])


def _jacobi_symmetric(a):
    """Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations."""
    a = np.array(a, dtype=float)
    n = a.shape[0]
    scale = np.sqrt(np.sum(a * a))
    if scale == 0.0:
        return np.zeros(n)
    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.sqrt(2.0 * np.sum(np.triu(a, 1) ** 2))
        if off <= JACOBI_TOL * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = _jacobi_tangent(theta)
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
    return np.diag(a).copy()


def _jacobi_tangent(theta):
    # smaller root of t^2 + 2 theta t - 1 = 0; 1 / (2 theta) once theta^2 would overflow
    if abs(theta) > 1e150:
        return 0.5 / theta
    return np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))


def _one_sided_jacobi(g):
    """Singular values of a real tall matrix by Hestenes column orthogonalization."""
    g = np.array(g, dtype=float)
    n = g.shape[1]
    for _ in range(JACOBI_MAX_SWEEPS):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = g[:, p] @ g[:, p]
                beta = g[:, q] @ g[:, q]
                gamma = g[:, p] @ g[:, q]
                if abs(gamma) <= JACOBI_TOL * np.sqrt(alpha * beta) or abs(gamma) * 1e300 <= abs(beta - alpha):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = _jacobi_tangent(zeta)
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                gp = g[:, p].copy()
                gq = g[:, q].copy()
                g[:, p] = c * gp - s * gq
                g[:, q] = s * gp + c * gq
        if not rotated:
            break
    return np.sqrt(np.sum(g * g, axis=0))


def eig_hermitian(a):
    """Eigenvalues of a Hermitian matrix in descending order.

    Raises
    ------
    ContractError
        If `a` deviates from Hermitian symmetry by more than
        :data:`HERMITIAN_TOL`.
    """
    m = _square(a)
    if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
        raise ContractError("matrix is not Hermitian")
    m = 0.5 * (m + m.conj().T)
    if np.all(m.imag == 0):
        lam = _jacobi_symmetric(m.real)
    else:
        lam = np.sort(_jacobi_symmetric(_real_embedding(m)))[::-1][::2]
    return np.sort(lam)[::-1]


def singular_values(a):
    """Singular values in descending order, ``min(rows, cols)`` of them."""
    m = as_cmatrix(a)
    if m.shape[0] < m.shape[1]:
        m = m.conj().T
    k = m.shape[1]
    if np.all(m.imag == 0):
        sv = _one_sided_jacobi(m.real)
    else:
        sv = np.sort(_one_sided_jacobi(_real_embedding(m)))[::-1][::2]
    return np.sort(sv)[::-1][:k]


def rank(a, tol=RANK_RTOL):
    """Numerical rank: the number of singular values above ``tol * sigma_max``."""
    if tol < 0:
        raise ContractError("rank tolerance must be nonnegative")
    sv = singular_values(a)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


def inverse(a):
    """Matrix inverse by Gauss-Jordan elimination with partial pivoting.

    Raises
    ------
    SingularityError
        If the condition number exceeds :data:`COND_MAX`.
    """
    m = _square(a)
    sv = singular_values(m)
    if sv[-1] == 0.0 or sv[0] / sv[-1] > COND_MAX:
        raise SingularityError("matrix is singular or ill-conditioned")
    n = m.shape[0]
    aug = np.hstack([m, identity(n)])
    for k in range(n):
        piv = k + int(np.argmax(np.abs(aug[k:, k])))
        if piv != k:
            aug[[k, piv]] = aug[[piv, k]]
        aug[k] /= aug[k, k]
        for i in range(n):
            if i != k:
                aug[i] -= aug[i, k] * aug[k]
    return aug[:, n:].copy()


def is_scaled_unitary(a, tol=1e-10):
    """Return ``(ok, c)`` where ``a^H a == c I`` holds within `tol` when ok."""
    m = as_cmatrix(a)
    g = m.conj().T @ m
    c = float(np.real(np.trace(g))) / g.shape[0]
    return bool(np.max(np.abs(g - c * np.eye(g.shape[0]))) <= tol * max(1.0, c)), c
