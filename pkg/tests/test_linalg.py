import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dynreg.linalg import (
    DenseSPD,
    DifferenceOperator,
    DifferencePreconditioner,
    EmbeddedVector,
    IdentityPreconditioner,
    as_blocks,
    difference_M_inverse_entry,
    difference_trace_inverse,
    dual_norm_sq,
    dump_matrix,
    embed_comparator,
    embed_loss,
    lipschitz_bound,
    load_matrix,
    weighted_norm_sq,
)
from dynreg.haar import HaarPreconditioner, haar_matrix

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def block_arrays(max_T=12, max_d=4):
    return st.tuples(st.integers(1, max_T), st.integers(1, max_d)).flatmap(
        lambda s: arrays(np.float64, s, elements=finite))


# embedding


def test_embed_loss_examples():
    assert np.array_equal(embed_loss(2, [3], 3).flat, [0, 3, 0])
    assert np.array_equal(embed_loss(1, [0, 0], 2).flat, [0, 0, 0, 0])
    assert np.array_equal(embed_loss(3, [1, -2], 3).flat, [0, 0, 0, 0, 1, -2])


@pytest.mark.parametrize("t", [0, 4, -1])
def test_embed_loss_out_of_range(t):
    with pytest.raises(IndexError):
        embed_loss(t, [1.0], 3)


def test_embed_comparator_examples():
    assert np.array_equal(embed_comparator([[1], [2], [3]]).flat, [1, 2, 3])
    assert np.array_equal(embed_comparator([[1, 0], [0, 1]]).flat, [1, 0, 0, 1])
    assert np.array_equal(embed_comparator([[5]] * 3).flat, [5, 5, 5])
    with pytest.raises(ValueError):
        embed_comparator([])


@given(block_arrays())
def test_block_and_flat_access_agree(blocks):
    v = EmbeddedVector(blocks)
    T, d = blocks.shape
    assert len(v) == d * T
    for t in range(1, T + 1):
        for j in range(d):
            assert v.flat[d * (t - 1) + j] == v.block(t)[j]
    assert EmbeddedVector.from_flat(v.flat, d) == v


def test_embedded_vector_is_immutable():
    v = EmbeddedVector([[1.0, 2.0]])
    with pytest.raises(ValueError):
        v.blocks[0, 0] = 3.0
    with pytest.raises(IndexError):
        v.block(2)


def test_as_blocks_rejects_bad_lengths():
    with pytest.raises(ValueError):
        as_blocks(np.arange(5.0), 2)


# weighted norms


def test_weighted_norm_examples():
    assert weighted_norm_sq(np.ones(4), DifferencePreconditioner(4)) == pytest.approx(1.0, rel=1e-14)
    assert weighted_norm_sq(np.array([1.0, 2.0]), IdentityPreconditioner(2)) == 5.0
    x = EmbeddedVector.from_flat([1, 0, 2, 0], 2)
    assert weighted_norm_sq(x, DifferencePreconditioner(2)) == pytest.approx(5.0, rel=1e-14)


def test_weighted_norm_dimension_mismatch():
    with pytest.raises(ValueError):
        weighted_norm_sq(np.ones(3), DifferencePreconditioner(4))
    with pytest.raises(ValueError):
        dual_norm_sq(np.ones(3), IdentityPreconditioner(4))


@given(block_arrays(max_T=16))
def test_difference_norm_is_squared_path_length(U):
    direct = float(np.sum(U[-1] ** 2) + np.sum(np.diff(U, axis=0) ** 2))
    got = weighted_norm_sq(U, DifferencePreconditioner(U.shape[0]))
    assert got == pytest.approx(direct, rel=1e-10, abs=1e-9)


@given(block_arrays(max_T=10))
def test_weighted_and_dual_norms_match_kronecker_oracle(U):
    T, d = U.shape
    S = DifferencePreconditioner(T)
    sigma = np.eye(T) - np.eye(T, k=1)
    M = np.kron(sigma.T @ sigma, np.eye(d))
    x = U.reshape(-1)
    assert weighted_norm_sq(U, S) == pytest.approx(x @ M @ x, rel=1e-9, abs=1e-6)
    assert dual_norm_sq(U, S) == pytest.approx(x @ np.linalg.solve(M, x), rel=1e-9, abs=1e-6)


# difference operator


@pytest.mark.parametrize("T", [1, 2, 3, 7, 64])
def test_difference_inverse_is_upper_ones(T):
    sig = DifferenceOperator(T)
    D, Dinv = sig.dense(), sig.dense_inverse()
    assert np.array_equal(D @ Dinv, np.eye(T))
    assert np.array_equal(Dinv @ D, np.eye(T))
    assert np.array_equal(np.linalg.eigvals(D).real, np.ones(T))
    x = np.arange(1.0, T + 1)
    assert np.array_equal(sig.apply_inverse(x), Dinv @ x)
    assert np.array_equal(sig.apply_inverse_transpose(x), Dinv.T @ x)
    assert np.array_equal(sig.apply(x), D @ x)


@pytest.mark.parametrize("T", [1, 2, 5, 33])
def test_difference_preconditioner_structured_matches_dense(T, rng):
    S = DifferencePreconditioner(T)
    sigma = np.eye(T) - np.eye(T, k=1)
    X = rng.normal(size=(T, 3))
    assert np.allclose(S.apply(X), sigma.T @ sigma @ X, rtol=1e-12, atol=1e-12)
    assert np.allclose(S.apply_inverse(X), np.linalg.solve(sigma.T @ sigma, X), rtol=1e-9, atol=1e-9)
    assert np.array_equal(S.inverse_diagonal(), np.diag(S.dense_inverse()))
    assert S.inverse_abs_max() == T


def test_inverse_entry_examples():
    assert difference_M_inverse_entry(1, 2, 3) == 2
    assert difference_M_inverse_entry(5, 5, 5) == 1
    assert difference_M_inverse_entry(2, 2, 4) == 3
    with pytest.raises(IndexError):
        difference_M_inverse_entry(0, 1, 3)


def test_trace_examples():
    assert difference_trace_inverse(4) == 10
    assert difference_trace_inverse(1) == 1
    assert difference_trace_inverse(512) == 131328
    assert difference_trace_inverse(512) == sum(512 - t + 1 for t in range(1, 513))
    with pytest.raises(ValueError):
        difference_trace_inverse(0)


@given(st.integers(1, 300))
def test_trace_is_sum_of_diagonal_entries(T):
    assert difference_trace_inverse(T) == sum(difference_M_inverse_entry(t, t, T) for t in range(1, T + 1))


@pytest.mark.parametrize("T", [3, 4, 8, 17, 64, 128])
def test_offdiagonal_frobenius_identities(T):
    idx = np.arange(1, T + 1)
    B = (T - np.maximum.outer(idx, idx) + 1).astype(np.int64)
    np.fill_diagonal(B, 0)
    rows = (B * B).sum(axis=1)
    assert int(rows.sum()) == T * T * (T * T - 1) // 6
    assert int(rows.max()) == T * (2 * T * T - 3 * T + 1) // 6
    assert 2 * int(rows.sum()) >= T * int(rows.max())


# dense SPD and Lipschitz bound


def test_dense_spd_validation():
    with pytest.raises(ValueError):
        DenseSPD([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        DenseSPD([[1.0, 0.0], [0.0, -1.0]])
    with pytest.raises(ValueError):
        DenseSPD(np.ones((2, 3)))
    S = DenseSPD([[2.0, 1.0], [1.0, 2.0]])
    assert np.allclose(S.apply_inverse(S.apply(np.array([1.0, -3.0]))), [1.0, -3.0])


def test_lipschitz_examples():
    assert lipschitz_bound(IdentityPreconditioner(5), 1.0) == 1.0
    sigma = np.eye(3) - np.eye(3, k=1)
    assert lipschitz_bound(sigma.T @ sigma, 1.0) == pytest.approx(3.0, rel=1e-12)
    assert lipschitz_bound(DifferencePreconditioner(3), 1.0) == 3.0
    H = haar_matrix(2)
    assert lipschitz_bound(np.linalg.inv(H @ H.T), 2.0) == pytest.approx(6.0, rel=1e-12)
    assert lipschitz_bound(HaarPreconditioner(4), 2.0) == 6.0
    with pytest.raises(np.linalg.LinAlgError):
        lipschitz_bound(np.ones((3, 3)), 1.0)


def test_matrix_text_roundtrip(tmp_path, rng):
    A = rng.normal(size=(5, 5))
    path = tmp_path / "a.txt"
    dump_matrix(path, A, d=2)
    assert path.read_text().splitlines()[0] == "5 2"
    B, d = load_matrix(path)
    assert d == 2 and np.array_equal(A, B)
