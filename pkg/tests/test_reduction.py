import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dynreg.haar import HaarPreconditioner, haar_comparator_norm_sq
from dynreg.learners import FastHaarReducer, Reducer
from dynreg.linalg import DifferencePreconditioner, IdentityPreconditioner, weighted_norm_sq
from dynreg.reduction import (
    HorizonMismatchError,
    Trajectory,
    duality_gap,
    dynamic_regret,
    embedded_regret,
    regret_decomposition,
    regret_records,
    run_reduction,
    wealth,
)


def _traj(w, g):
    w, g = np.asarray(w, float), np.asarray(g, float)
    z = np.zeros(len(w))
    return Trajectory(w, g, z, z, z, z, z)


def test_dynamic_regret_examples():
    t = _traj([[1.0], [1.0]], [[1.0], [1.0]])
    assert dynamic_regret(t, [[0.0], [2.0]]) == 0.0
    assert dynamic_regret(t, [[1.0], [1.0]]) == 0.0
    with pytest.raises(ValueError):
        dynamic_regret(t, [[0.0], [0.0], [0.0]])


def test_static_comparator_is_static_regret(rng):
    r = FastHaarReducer(16, 2)
    traj = run_reduction(r, rng.normal(size=(16, 2)) / 2)
    u = np.array([0.3, -0.1])
    static = sum(float(g @ (w - u)) for g, w in zip(traj.losses, traj.plays))
    assert dynamic_regret(traj, np.tile(u, (16, 1))) == pytest.approx(static, rel=1e-12)


def test_zero_losses():
    traj = run_reduction(Reducer(DifferencePreconditioner(6), 1), np.zeros((6, 1)))
    zero = np.zeros((6, 1))
    assert dynamic_regret(traj, zero) == 0.0
    assert duality_gap(traj, np.ones((6, 1))) == 0.0


def test_regret_against_zero_is_sum_of_plays():
    losses = np.array([[1.0], [-1.0], [1.0], [-1.0]])
    traj = run_reduction(FastHaarReducer(4, 1), losses)
    assert dynamic_regret(traj, np.zeros((4, 1))) == float(np.sum(losses[:, 0] * traj.plays[:, 0]))


def test_horizon_mismatch():
    with pytest.raises(HorizonMismatchError):
        run_reduction(FastHaarReducer(8, 1), np.zeros((7, 1)))
    with pytest.raises(HorizonMismatchError):
        run_reduction(FastHaarReducer(8, 2), np.zeros((8, 3)))
    with pytest.raises(ValueError):
        run_reduction(FastHaarReducer(8, 1))
    traj = run_reduction(FastHaarReducer(8, 1), np.ones((5, 1)), partial=True)
    assert traj.rounds == 5


@pytest.mark.parametrize("make", [
    lambda: FastHaarReducer(16, 2),
    lambda: Reducer(DifferencePreconditioner(16), 2),
    lambda: Reducer(IdentityPreconditioner(16), 2),
])
@pytest.mark.parametrize("seed", range(4))
def test_regret_equivalence_and_duality(make, seed):
    rng = np.random.default_rng(seed)
    losses = rng.uniform(-1, 1, size=(16, 2)) / np.sqrt(2)
    traj = run_reduction(make(), losses, debug=True)
    U = rng.normal(size=(16, 2))
    R = dynamic_regret(traj, U)
    assert embedded_regret(traj, U) == pytest.approx(R, rel=1e-12, abs=1e-12)
    assert abs(duality_gap(traj, U)) < 1e-10 * (1 + abs(R))
    assert wealth(traj) == pytest.approx(-float(np.sum(traj.losses * traj.plays)), rel=1e-12)


def test_embedded_regret_needs_debug(rng):
    traj = run_reduction(FastHaarReducer(4, 1), rng.normal(size=(4, 1)))
    with pytest.raises(ValueError):
        embedded_regret(traj, np.zeros((4, 1)))


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 31))
def test_prefix_replay_is_bit_exact(seed, k):
    rng = np.random.default_rng(seed)
    losses = rng.normal(size=(32, 2))
    full = run_reduction(FastHaarReducer(32, 2, backend="python"), losses)
    part = run_reduction(FastHaarReducer(32, 2, backend="python"), losses[:k], partial=True)
    assert np.array_equal(full.plays[:k], part.plays)


def test_plays_do_not_depend_on_future_losses(rng):
    a = rng.normal(size=(16, 1))
    b = a.copy()
    b[10:] = rng.normal(size=(6, 1))
    pa = run_reduction(Reducer(DifferencePreconditioner(16), 1), a).plays
    pb = run_reduction(Reducer(DifferencePreconditioner(16), 1), b).plays
    assert np.array_equal(pa[:11], pb[:11])


@pytest.mark.parametrize("seed", range(10))
def test_decomposition_identity(seed):
    rng = np.random.default_rng(seed)
    T, d = 32, 2
    losses = rng.uniform(-1, 1, size=(T, d)) / np.sqrt(d)
    U = rng.normal(size=(T, d))
    for learner, norm in (
        (FastHaarReducer(T, d), np.sqrt(haar_comparator_norm_sq(U))),
        (Reducer(DifferencePreconditioner(T), d), np.sqrt(weighted_norm_sq(U, DifferencePreconditioner(T)))),
    ):
        traj = run_reduction(learner, losses)
        total, one_d, direction = regret_decomposition(traj, U, norm)
        assert total == pytest.approx(one_d + norm * direction, rel=1e-9, abs=1e-12)
    with pytest.raises(ValueError):
        regret_decomposition(traj, U, 0.0)


def test_records_are_prefix_sums(rng):
    T = 16
    traj = run_reduction(FastHaarReducer(T, 2), rng.normal(size=(T, 2)) / 2)
    U1, U2 = np.zeros((T, 2)), rng.normal(size=(T, 2))
    recs = regret_records(traj, [U1, U2])
    assert [r.t for r in recs] == list(range(1, T + 1))
    for k in range(2):
        inst = np.array([r.inst_regret[k] for r in recs])
        cum = np.array([r.cum_regret[k] for r in recs])
        assert np.allclose(np.cumsum(inst), cum, rtol=1e-12, atol=1e-13)
    assert recs[-1].regret_cum == pytest.approx(dynamic_regret(traj, U1), rel=1e-12)
    assert recs[-1].wealth == pytest.approx(wealth(traj), rel=1e-12)
    assert recs[-1].dual_norm == pytest.approx(np.sqrt(traj.dual_norm_sq[-1]), rel=1e-15)


def test_online_losses_see_the_play():
    seen = []

    def loss_fn(t, w):
        seen.append((t, w.copy()))
        return np.sign(w - 1.0) if t > 1 else np.array([-1.0])

    traj = run_reduction(FastHaarReducer(8, 1), loss_fn=loss_fn)
    assert [t for t, _ in seen] == list(range(1, 9))
    assert all(np.array_equal(w, p) for (_, w), p in zip(seen, traj.plays))


def test_truncated():
    traj = run_reduction(FastHaarReducer(8, 1), np.ones((8, 1)) / 2, debug=True)
    short = traj.truncated(3)
    assert short.rounds == 3 and short.full_iterates.shape == (3, 8, 1)
