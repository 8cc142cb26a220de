import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conzopt import (
    LdltFactor,
    RankDeficiencyError,
    SparseMat,
    blkdiag,
    hcat,
    ldlt_factorize,
    ldlt_solve,
    multiply,
    vcat,
)
from oracles import dense_ldlt


def test_transpose_swaps_indices():
    a = SparseMat.from_triplets([0, 1], [0, 2], [1.0, 2.0], (2, 3))
    at = a.T
    assert at.shape == (3, 2)
    assert at.triplets() == [(0, 0, 1.0), (2, 1, 2.0)]


def test_blkdiag_identities():
    out = blkdiag(SparseMat.eye(2), SparseMat.eye(3))
    assert np.array_equal(out.toarray(), np.eye(5))


def test_multiply_hand_example():
    a = SparseMat([[1.0, 2.0], [3.0, 4.0]])
    b = SparseMat([[1.0], [1.0]])
    assert np.array_equal(multiply(a, b).toarray(), [[3.0], [7.0]])


def test_multiply_dimension_mismatch_names_shapes():
    a = SparseMat(np.ones((2, 3)))
    b = SparseMat(np.ones((2, 3)))
    with pytest.raises(ValueError, match=r"\(2, 3\).*\(2, 3\)"):
        multiply(a, b)


def test_concat_dimension_errors():
    with pytest.raises(ValueError):
        hcat(SparseMat(np.ones((2, 2))), SparseMat(np.ones((3, 2))))
    with pytest.raises(ValueError):
        vcat(SparseMat(np.ones((2, 2))), SparseMat(np.ones((2, 3))))


def test_construction_prunes_zeros():
    a = SparseMat([[0.0, 1.0], [0.0, 0.0]])
    assert a.nnz == 1
    d = SparseMat.diag([1.0, 0.0, 2.0])
    assert d.nnz == 2
    assert d.shape == (3, 3)


def test_multiply_drops_cancelled_entries():
    a = SparseMat([[1.0, 1.0], [0.0, 0.0]])
    b = SparseMat([[1.0], [-1.0]])
    assert multiply(a, b).nnz == 0


def test_immutable():
    a = SparseMat.eye(2)
    with pytest.raises(AttributeError):
        a.shape = (3, 3)


@given(st.integers(2, 6), st.integers(2, 6), st.integers(0, 10 ** 6))
@settings(max_examples=30, deadline=None)
def test_nnz_accounting(n, m, seed):
    rng = np.random.default_rng(seed)
    dense_a = rng.normal(size=(n, m)) * (rng.random(size=(n, m)) < 0.6)
    dense_b = rng.normal(size=(m, m)) * (rng.random(size=(m, m)) < 0.6)
    a, b = SparseMat(dense_a), SparseMat(dense_b)
    assert a.T.nnz == a.nnz
    assert blkdiag(a, b).nnz == a.nnz + b.nnz
    assert hcat(a, SparseMat.zeros(n, 2)).nnz == a.nnz
    assert vcat(b, b).nnz == 2 * b.nnz
    assert a.scale(2.0).nnz == a.nnz


def _random_quasi_definite(rng, n_pos, n_con):
    """[[H, A^T], [A, 0]] with H positive definite and A full row rank."""
    L = rng.normal(size=(n_pos, n_pos))
    H = L @ L.T + n_pos * np.eye(n_pos)
    A = rng.normal(size=(n_con, n_pos))
    top = np.hstack([H, A.T])
    bottom = np.hstack([A, np.zeros((n_con, n_con))])
    return np.vstack([top, bottom])


def test_ldlt_diagonal():
    f = ldlt_factorize(SparseMat.diag([2.0, -3.0]))
    assert np.array_equal(f.L.toarray(), np.eye(2))
    assert np.array_equal(f.D, [2.0, -3.0])


def test_ldlt_hand_elimination():
    f = ldlt_factorize(SparseMat([[2.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(f.L.toarray(), [[1.0, 0.0], [0.5, 1.0]])
    assert np.allclose(f.D, [2.0, -0.5])


def test_ldlt_solve_hand_examples():
    f = ldlt_factorize(SparseMat.diag([2.0, -3.0]))
    assert np.allclose(ldlt_solve(f, [4.0, 6.0]), [2.0, -2.0])
    f2 = ldlt_factorize(SparseMat([[2.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(ldlt_solve(f2, [1.0, 1.0]), [1.0, -1.0])


def test_ldlt_matches_dense_oracle(rng):
    M = _random_quasi_definite(rng, 8, 3)
    f = ldlt_factorize(SparseMat(M))
    L_ref, D_ref = dense_ldlt(M)
    assert np.allclose(f.L.toarray(), L_ref, atol=1e-12)
    assert np.allclose(f.D, D_ref, atol=1e-12)


def test_ldlt_reconstruction_bound(rng):
    for n_pos, n_con in [(5, 2), (20, 6), (60, 20)]:
        M = _random_quasi_definite(rng, n_pos, n_con)
        f = ldlt_factorize(SparseMat(M))
        L = f.L.toarray()
        err = np.max(np.abs(L @ np.diag(f.D) @ L.T - M))
        assert err <= 1e-10 * (1.0 + np.max(np.abs(M)))


def test_ldlt_mixed_pivot_signs(rng):
    M = _random_quasi_definite(rng, 6, 3)
    f = ldlt_factorize(SparseMat(M))
    assert np.sum(f.D > 0) == 6
    assert np.sum(f.D < 0) == 3


def test_ldlt_solve_residual(rng):
    M = _random_quasi_definite(rng, 14, 6)
    f = ldlt_factorize(SparseMat(M))
    rhs = rng.normal(size=20)
    x = ldlt_solve(f, rhs)
    assert np.max(np.abs(M @ x - rhs)) <= 1e-8 * (1.0 + np.max(np.abs(rhs)))


@pytest.mark.parametrize("dim", [10, 50, 200])
def test_ldlt_roundtrip_random(dim):
    rng = np.random.default_rng(dim)
    n_con = dim // 4
    M = _random_quasi_definite(rng, dim - n_con, n_con)
    f = ldlt_factorize(SparseMat(M))
    x_true = rng.normal(size=dim)
    x = ldlt_solve(f, M @ x_true)
    assert np.max(np.abs(x - x_true)) <= 1e-8 * (1.0 + np.max(np.abs(x_true)))


def test_ldlt_matrix_rhs(rng):
    M = _random_quasi_definite(rng, 10, 4)
    f = ldlt_factorize(SparseMat(M))
    B = rng.normal(size=(14, 5))
    X = ldlt_solve(f, B)
    assert np.max(np.abs(M @ X - B)) <= 1e-8


def test_ldlt_rcm_ordering(rng):
    # sparse quasi-definite: diagonally dominant H, full-row-rank sparse A
    W = rng.normal(size=(12, 12)) * (rng.random(size=(12, 12)) < 0.3)
    W = W + W.T
    H = W + np.diag(np.sum(np.abs(W), axis=1) + 1.0)
    A = np.hstack([np.eye(5), rng.normal(size=(5, 7)) * (rng.random(size=(5, 7)) < 0.4)])
    M = np.block([[H, A.T], [A, np.zeros((5, 5))]])
    f = ldlt_factorize(SparseMat(M), ordering="rcm")
    assert f.perm is not None
    P = np.eye(17)[f.perm]
    L = f.L.toarray()
    err = np.max(np.abs(L @ np.diag(f.D) @ L.T - P @ M @ P.T))
    assert err <= 1e-10 * (1.0 + np.max(np.abs(M)))
    rhs = rng.normal(size=17)
    assert np.max(np.abs(M @ ldlt_solve(f, rhs) - rhs)) <= 1e-7


def test_ldlt_rank_deficiency_reports_pivot():
    # coupling rows are linearly dependent -> zero pivot in the trailing block
    A = np.array([[1.0, 2.0], [2.0, 4.0]])
    M = np.block([
        [np.eye(2) * 2.0, A.T],
        [A, np.zeros((2, 2))],
    ])
    with pytest.raises(RankDeficiencyError) as err:
        ldlt_factorize(SparseMat(M))
    assert err.value.pivot_index == 3


def test_ldlt_rejects_nonsymmetric():
    with pytest.raises(ValueError, match="symmetric"):
        ldlt_factorize(SparseMat([[1.0, 2.0], [0.0, 1.0]]))


def test_ldlt_rejects_nonsquare():
    with pytest.raises(ValueError):
        ldlt_factorize(SparseMat(np.ones((2, 3))))


def test_ldlt_solve_dimension_error(rng):
    f = ldlt_factorize(SparseMat.eye(3))
    with pytest.raises(ValueError, match="length 2"):
        ldlt_solve(f, np.ones(2))


def test_ldlt_sparse_solve_path(rng):
    # force the CSC fallback used above the dense-cache threshold
    M = _random_quasi_definite(rng, 30, 10)
    f = ldlt_factorize(SparseMat(M))
    object.__setattr__(f, "_Ldense", None)
    rhs = rng.normal(size=40)
    assert np.max(np.abs(M @ ldlt_solve(f, rhs) - rhs)) <= 1e-8
    B = rng.normal(size=(40, 3))
    assert np.max(np.abs(M @ ldlt_solve(f, B) - B)) <= 1e-8


def test_factor_keeps_cancellation_structurally():
    # cancellation inside elimination keeps a structural slot in L
    M = np.array([
        [1.0, 1.0, 1.0],
        [1.0, 2.0, 2.0],
        [1.0, 2.0, 1.0],
    ])
    f = ldlt_factorize(SparseMat(M))
    # L[2,1] = (2 - 1*1*2... ) pattern exists even if a value cancels to zero
    L = f.L
    assert L.shape == (3, 3)
    recon = L.toarray() @ np.diag(f.D) @ L.toarray().T
    assert np.allclose(recon, M, atol=1e-12)
