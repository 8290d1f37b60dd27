import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dynreg.haar import haar_matrix
from dynreg.verify import (
    ConvergenceError,
    adversary_search,
    difference_inverse_dense,
    difference_rows,
    empirical_quadratic_tail,
    frobenius_condition,
    interlacing_holds,
    offdiag_stats,
    perturbation_bound_sides,
    power_iteration,
    verify_difference_eigen_bound,
    verify_perturbation_bound,
    wolkowicz_upper_bound,
)


def closed_form_lambda_max(T):
    # eigenvalues of Sigma^T Sigma are 2 - 2 cos((2k - 1) pi / (2T + 1))
    return 1.0 / (2.0 - 2.0 * math.cos(math.pi / (2 * T + 1)))


# Wolkowicz bound


def test_wolkowicz_examples():
    assert wolkowicz_upper_bound(np.eye(3)) == 1.0
    assert wolkowicz_upper_bound(np.diag([1.0, 3.0])) == 3.0
    A = difference_inverse_dense(4)
    assert wolkowicz_upper_bound(A) >= np.linalg.eigvalsh(A)[-1]
    with pytest.raises(ValueError):
        wolkowicz_upper_bound(np.array([[1.0, 2.0], [0.0, 1.0]]))


@given(st.integers(2, 12), st.integers(0, 2 ** 32 - 1))
def test_wolkowicz_dominates_largest_eigenvalue(n, seed):
    X = np.random.default_rng(seed).normal(size=(n, n))
    S = X + X.T
    assert wolkowicz_upper_bound(S) >= np.linalg.eigvalsh(S)[-1] - 1e-9 * np.abs(S).max()


# power iteration and the eigenvalue bound


@pytest.mark.parametrize("T", [2, 3, 4, 10, 100])
def test_closed_form_eigenvalue_matches_dense(T):
    assert closed_form_lambda_max(T) == pytest.approx(np.linalg.eigvalsh(difference_inverse_dense(T))[-1], rel=1e-10)


def test_eigen_bound_examples():
    rep = verify_difference_eigen_bound(2)
    assert rep.lambda_max_inverse == pytest.approx((3 + math.sqrt(5)) / 2, rel=1e-9)
    assert rep.condition_ok["lambda_max<=0.9*trace"] and rep.trace_inverse == 3
    rep4 = verify_difference_eigen_bound(4)
    assert rep4.lambda_max_inverse <= 9
    assert rep4.lambda_max_inverse == pytest.approx(np.linalg.eigvalsh(difference_inverse_dense(4))[-1], rel=1e-9)
    assert verify_difference_eigen_bound(1024).condition_ok["lambda_max<=0.9*trace"]
    with pytest.raises(ValueError):
        verify_difference_eigen_bound(1)


@pytest.mark.parametrize("T", [2, 4, 8, 16, 32, 64, 128, 256, 512, 1024, 3, 11, 37, 90, 211, 333, 500, 678, 901, 999])
def test_eigen_bound_holds(T):
    rep = verify_difference_eigen_bound(T)
    assert rep.lambda_max_inverse == pytest.approx(closed_form_lambda_max(T), rel=1e-8)
    assert all(rep.condition_ok.values())
    idx = np.arange(1, T + 1)
    B = T - np.maximum.outer(idx, idx) + 1
    assert rep.notes["frobenius_sq_inverse"] == float(np.sum(B * B))


def test_intermediate_frobenius_formula_is_reported_not_asserted():
    rep = verify_difference_eigen_bound(3)
    assert rep.notes["triangular_half_sum"] == 20.0
    assert rep.notes["frobenius_sq_inverse"] == 26.0
    assert rep.notes["triangular_half_sum_matches_frobenius"] is False


def test_power_iteration_failure():
    rot = lambda x: np.array([-x[1], x[0]])  # noqa: E731
    with pytest.raises(ConvergenceError):
        power_iteration(rot, 2, max_iter=50)


def test_report_serializes():
    data = json.loads(verify_difference_eigen_bound(8).to_json())
    assert data["T"] == 8 and data["label"] == "difference"


# rank-one perturbation


def test_perturbation_examples():
    B = difference_rows(3).T @ difference_rows(3)
    v = np.array([0.0, 0.0, 1.0])
    assert verify_perturbation_bound(B, v)
    sigma = np.eye(3) - np.eye(3, k=1)
    assert np.array_equal(B + np.outer(v, v), sigma.T @ sigma)
    lhs, rhs = perturbation_bound_sides(np.diag([0.0, 1.0]), np.array([1.0, 0.0]))
    assert lhs == pytest.approx(2.0) and rhs == pytest.approx(2.0)
    assert verify_perturbation_bound(np.diag([0.0, 1.0]), np.array([1.0, 0.0]))


def test_perturbation_holds_for_unit_vectors():
    T = 16
    B = difference_rows(T).T @ difference_rows(T)
    for seed in range(50):
        v = np.random.default_rng(seed).normal(size=T)
        assert verify_perturbation_bound(B, v / np.linalg.norm(v))


def test_perturbation_flags_large_vectors():
    # the trace stays bounded while ||v||^2 grows
    T = 16
    B = difference_rows(T).T @ difference_rows(T)
    v = 10.0 * np.ones(T) / math.sqrt(T)
    assert verify_perturbation_bound(B, v) is False


def test_perturbation_errors():
    with pytest.raises(ValueError):
        verify_perturbation_bound(np.eye(3), np.ones(3))
    with pytest.raises(ValueError):
        verify_perturbation_bound(np.diag([0.0, 0.0, 1.0]), np.ones(3))
    with pytest.raises(np.linalg.LinAlgError):
        verify_perturbation_bound(np.diag([0.0, 1.0]), np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        verify_perturbation_bound(np.diag([0.0, 1.0]), np.zeros(2))


@given(st.integers(2, 32), st.integers(0, 2 ** 32 - 1))
def test_interlacing(T, seed):
    D = difference_rows(T)
    v = np.random.default_rng(seed).normal(size=T)
    assert interlacing_holds(D.T @ D, v)


@pytest.mark.parametrize("T", [8, 32, 64])
def test_biased_trace_floor(T):
    D = difference_rows(T)
    rng = np.random.default_rng(T)
    for _ in range(20):
        v = rng.normal(size=T) * rng.uniform(0.01, 100)
        assert np.trace(np.linalg.inv(D.T @ D + np.outer(v, v))) >= T * (T + 1) / 20


# Frobenius condition


def test_frobenius_examples():
    assert frobenius_condition(difference_inverse_dense(8))
    assert frobenius_condition(np.eye(5))
    H = haar_matrix(2)
    total, row = offdiag_stats(H @ H.T)
    assert frobenius_condition(H @ H.T) == (total >= 2 * row)


@pytest.mark.parametrize("T", [4, 5, 16, 100, 128])
def test_frobenius_closed_form(T):
    total, row = offdiag_stats(difference_inverse_dense(T))
    assert total == T * T * (T * T - 1) / 6
    assert row == T * (2 * T * T - 3 * T + 1) / 6
    assert frobenius_condition(difference_inverse_dense(T))


# adversary and Rademacher tail


def test_adversary_identity_is_degenerate():
    out = adversary_search(np.eye(6), G=2.0, P=1.0)
    assert out.success and out.success_fraction == 1.0
    assert out.achieved_quadratic == pytest.approx(4.0 * 6)


def test_adversary_difference_T8():
    A = difference_inverse_dense(8)
    out = adversary_search(A, G=1.0, P=4.0, q=1.0)
    assert out.patterns_checked == 256 and out.success
    assert out.achieved_quadratic == A.sum()  # all signs equal maximize a positive matrix
    assert out.achieved_quadratic >= out.threshold
    u = out.comparator
    assert u @ np.linalg.solve(A, u) == pytest.approx(4.0, rel=1e-10)
    g = out.signs
    assert out.regret_lower_value == pytest.approx(2.0 * math.sqrt(g @ A @ g), rel=1e-12)
    # zero-play regret against u is -<g, u>
    assert -float(g @ u) == pytest.approx(out.regret_lower_value, rel=1e-10)


def test_adversary_exact_fraction_matches_bruteforce():
    A = difference_inverse_dense(6)
    out = adversary_search(A, q=1.0)
    thr = np.trace(A) + np.linalg.norm(A - np.diag(np.diag(A)))
    Ys = np.array([[1 - 2 * ((k >> i) & 1) for i in range(6)] for k in range(64)], dtype=float)
    assert out.success_fraction == np.mean(np.einsum("ij,jk,ik->i", Ys, A, Ys) >= thr * (1 - 1e-12))


def test_adversary_errors_and_sampled_mode():
    with pytest.raises(ValueError):
        adversary_search(np.eye(21))
    with pytest.raises(ValueError):
        adversary_search(np.eye(3), q=0.5)
    with pytest.raises(ValueError):
        adversary_search(np.eye(3), mode="greedy")
    a = adversary_search(difference_inverse_dense(40), mode="sampled", samples=5000, seed=3)
    b = adversary_search(difference_inverse_dense(40), mode="sampled", samples=5000, seed=3)
    assert a.success and np.array_equal(a.signs, b.signs)
    json.loads(a.to_json())


def test_tail_identity_is_constant():
    s = empirical_quadratic_tail(np.eye(5), G=3.0, trials=100, seed=1)
    assert s["min"] == s["max"] == 45.0 and s["within_3se"]


def test_tail_mean_T16():
    A = difference_inverse_dense(16)
    s = empirical_quadratic_tail(A, trials=100_000, seed=0)
    assert s["expected"] == 136.0
    assert abs(s["mean"] - 136.0) <= 3 * s["std_err"]
    assert set(s["fraction_exceeding"]) == {"1", "2", "3"}


def test_exhaustive_min_below_trace_below_max():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(8, 8))
    for A in (difference_inverse_dense(8), X @ X.T, np.diag(rng.uniform(1, 2, 8))):
        Ys = np.array([[1 - 2 * ((k >> i) & 1) for i in range(8)] for k in range(256)], dtype=float)
        q = np.einsum("ij,jk,ik->i", Ys, A, Ys)
        assert q.min() <= np.trace(A) + 1e-9 and np.trace(A) <= q.max() + 1e-9
