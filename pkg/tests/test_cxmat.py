import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import crandn, random_unitary
from diffstc import cxmat
from diffstc.errors import ContractError, ShapeError, SingularityError

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def cmats(rows, cols):
    return st.tuples(arrays(float, (rows, cols), elements=finite),
                     arrays(float, (rows, cols), elements=finite)).map(lambda t: t[0] + 1j * t[1])


def test_matmul_examples(rng):
    A = crandn(rng, 2, 2)
    assert np.allclose(cxmat.matmul(cxmat.identity(2), A), A)
    P = np.array([[0, 1], [1, 0]])
    assert np.array_equal(cxmat.matmul(P, P), np.eye(2))
    A, B, C = (crandn(rng, 3, 3) for _ in range(3))
    assert np.abs(cxmat.matmul(cxmat.matmul(A, B), C) - cxmat.matmul(A, cxmat.matmul(B, C))).max() < 1e-12


def test_matmul_shape_error():
    with pytest.raises(ShapeError):
        cxmat.matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_non_finite_rejected():
    with pytest.raises(ContractError):
        cxmat.as_cmatrix([[np.nan, 0], [0, 1]])
    with pytest.raises(ShapeError):
        cxmat.as_cmatrix(np.ones(3))


def test_hermitian_examples(rng):
    assert np.array_equal(cxmat.hermitian(np.eye(3)), np.eye(3))
    assert cxmat.hermitian([[1j]])[0, 0] == -1j
    A = crandn(rng, 4, 2)
    assert np.array_equal(cxmat.hermitian(cxmat.hermitian(A)), A)


def test_trace_examples(rng):
    assert cxmat.trace(np.eye(3)) == 3
    A = crandn(rng, 3, 3)
    assert abs(cxmat.trace(A + A.conj().T) - 2 * cxmat.trace(A).real) < 1e-12
    A, B, C = (crandn(rng, 2, 2) for _ in range(3))
    assert abs(cxmat.trace(A @ B @ C) - cxmat.trace(C @ A @ B)) < 1e-12


def test_frobenius_examples(rng):
    assert cxmat.frobenius_norm_sq(np.eye(2)) == 2
    assert cxmat.frobenius_norm_sq(np.zeros((3, 3))) == 0
    A = crandn(rng, 3, 3)
    assert abs(cxmat.frobenius_norm_sq(A) - sum(abs(v) ** 2 for v in A.ravel())) < 1e-12


def test_determinant_examples(rng):
    assert cxmat.determinant(np.diag([2, 3])) == 6
    A, B = crandn(rng, 2, 3), crandn(rng, 3, 2)
    assert abs(cxmat.determinant(np.eye(2) + A @ B) - cxmat.determinant(np.eye(3) + B @ A)) < 1e-10
    assert abs(abs(cxmat.determinant(random_unitary(rng, 4))) - 1) < 1e-12
    M = crandn(rng, 5, 5)
    assert abs(cxmat.determinant(M) - np.linalg.det(M)) < 1e-10 * abs(np.linalg.det(M))


def test_rank_examples(rng):
    assert cxmat.rank(np.diag([1, 0])) == 1
    assert cxmat.rank(np.zeros((2, 2))) == 0
    A = sum(np.outer(crandn(rng, 4), crandn(rng, 3)) for _ in range(2))
    assert cxmat.rank(A) == 2
    assert cxmat.rank(A.conj().T @ A) == 2
    with pytest.raises(ContractError):
        cxmat.rank(A, tol=-1)


def test_rank_invariant_under_full_rank_products(rng):
    for r in (1, 2, 3):
        A = sum(np.outer(crandn(rng, 4), crandn(rng, 4)) for _ in range(r))
        U, V = crandn(rng, 4, 4), crandn(rng, 4, 4)
        assert cxmat.rank(U @ A) == cxmat.rank(A @ V) == cxmat.rank(A) == r


def test_eig_examples(rng):
    assert np.allclose(cxmat.eig_hermitian(np.eye(3)), [1, 1, 1])
    assert np.allclose(cxmat.eig_hermitian(np.diag([1, 4])), [4, 1])
    A = crandn(rng, 3, 3)
    assert np.abs(cxmat.eig_hermitian(A.conj().T @ A) - cxmat.singular_values(A) ** 2).max() < 1e-9
    with pytest.raises(ContractError):
        cxmat.eig_hermitian(np.array([[0, 1], [0, 0]]))


def test_singular_value_examples(rng):
    assert np.allclose(cxmat.singular_values(np.eye(2)), [1, 1])
    assert np.allclose(cxmat.singular_values(np.diag([3, 0])), [3, 0])
    d = np.array([5.0, 2.0, 0.5])
    U, V = random_unitary(rng, 3), random_unitary(rng, 3)
    assert np.abs(cxmat.singular_values(U @ np.diag(d) @ V.conj().T) - d).max() < 1e-12


def test_inverse_examples(rng):
    assert np.allclose(cxmat.inverse(np.eye(4)), np.eye(4))
    assert np.allclose(cxmat.inverse(np.diag([2, 4])), np.diag([0.5, 0.25]))
    A = crandn(rng, 3, 3)
    assert np.abs(cxmat.inverse(A) @ A - np.eye(3)).max() < 1e-9
    with pytest.raises(SingularityError):
        cxmat.inverse(np.ones((2, 2)))


def test_is_scaled_unitary(rng):
    ok, c = cxmat.is_scaled_unitary(3 * random_unitary(rng, 3))
    assert ok and abs(c - 9) < 1e-12
    assert not cxmat.is_scaled_unitary(np.diag([1, 2]))[0]


@settings(max_examples=60, deadline=None)
@given(cmats(3, 3))
def test_eig_sum_equals_frobenius(A):
    assert abs(np.sum(cxmat.eig_hermitian(A.conj().T @ A)) - cxmat.frobenius_norm_sq(A)) <= 1e-9 * max(
        1.0, cxmat.frobenius_norm_sq(A))


@settings(max_examples=60, deadline=None)
@given(cmats(4, 3))
def test_eig_matches_lapack(A):
    G = A.conj().T @ A
    ref = np.sort(np.linalg.eigvalsh(G))[::-1]
    assert np.abs(cxmat.eig_hermitian(G) - ref).max() <= 1e-9 * max(1.0, ref[0])
    sv = np.linalg.svd(A, compute_uv=False)
    assert np.abs(cxmat.singular_values(A) - sv).max() <= 1e-9 * max(1.0, sv[0])


def test_sylvester_identity_many(rng):
    for _ in range(200):
        m, n = rng.integers(1, 5, 2)
        A, B = crandn(rng, m, n), crandn(rng, n, m)
        l, r = cxmat.determinant(np.eye(m) + A @ B), cxmat.determinant(np.eye(n) + B @ A)
        assert abs(l - r) <= 1e-9 * max(1.0, abs(l))
