"""Dynamic-to-static wrapper, regret and wealth bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import as_blocks, embed_comparator, embed_loss

__all__ = [
    "HorizonMismatchError",
    "Trajectory",
    "RegretRecord",
    "run_reduction",
    "dynamic_regret",
    "embedded_regret",
    "wealth",
    "duality_gap",
    "regret_records",
    "regret_decomposition",
]


class HorizonMismatchError(ValueError):
    pass


@dataclass
class Trajectory:
    """Per-round arrays from one run; row ``t-1`` holds round ``t``."""

    plays: np.ndarray
    losses: np.ndarray
    betas: np.ndarray
    scalar_losses: np.ndarray
    V: np.ndarray
    dual_norm_sq: np.ndarray
    wealth_1d: np.ndarray
    full_iterates: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def rounds(self) -> int:
        return self.plays.shape[0]

    @property
    def dim(self) -> int:
        return self.plays.shape[1]

    def wealth(self) -> np.ndarray:
        """Running ``-sum_s <g_s, w_s>``."""
        return -np.cumsum(np.sum(self.losses * self.plays, axis=1))

    def truncated(self, k: int) -> "Trajectory":
        fi = None if self.full_iterates is None else self.full_iterates[:k]
        return Trajectory(
            self.plays[:k], self.losses[:k], self.betas[:k], self.scalar_losses[:k],
            self.V[:k], self.dual_norm_sq[:k], self.wealth_1d[:k], fi, dict(self.meta),
        )


@dataclass(frozen=True)
class RegretRecord:
    t: int
    w: np.ndarray
    g: np.ndarray
    inst_regret: tuple
    cum_regret: tuple
    wealth: float
    V: float
    dual_norm: float
    beta: float

    @property
    def regret_cum(self) -> float:
        return self.cum_regret[0] if self.cum_regret else 0.0


def run_reduction(learner, losses=None, *, loss_fn=None, debug: bool = False, partial: bool = False) -> Trajectory:
    """Drive ``learner`` over the rounds and record the trajectory.

    Losses come either precomputed (``losses``, ``(T, d)``) or online from
    ``loss_fn(t, w_t) -> g_t``, which sees the play before choosing the loss.
    ``debug`` additionally stores the full ``(T, d)`` iterate of every round.
    ``partial`` allows fewer precomputed losses than the learner's horizon.
    """
    T, d = learner.horizon, learner.dim
    if (losses is None) == (loss_fn is None):
        raise ValueError("pass exactly one of losses or loss_fn")
    if losses is not None:
        losses = as_blocks(losses, d)
        if losses.shape[1] != d:
            raise HorizonMismatchError(f"losses have dimension {losses.shape[1]}, learner expects {d}")
        rounds = losses.shape[0]
        if rounds != T and not (partial and rounds < T):
            raise HorizonMismatchError(f"{rounds} losses for a learner with horizon {T}")
    else:
        rounds = T
    plays = np.zeros((rounds, d))
    seen = np.zeros((rounds, d))
    betas = np.zeros(rounds)
    scalar = np.zeros(rounds)
    V = np.zeros(rounds)
    dual = np.zeros(rounds)
    wealth_1d = np.zeros(rounds)
    full = np.zeros((rounds, T, d)) if debug else None
    for i in range(rounds):
        w = learner.predict()
        if debug:
            full[i] = learner.full_play()
        g = losses[i] if losses is not None else np.atleast_1d(np.asarray(loss_fn(i + 1, w.copy()), dtype=float))
        learner.update(g)
        plays[i] = w
        seen[i] = g
        betas[i] = learner.beta
        scalar[i] = learner.last_scalar_loss
        V[i] = learner.V
        dual[i] = learner.dual_norm_sq
        wealth_1d[i] = learner.wealth_1d
    return Trajectory(plays, seen, betas, scalar, V, dual, wealth_1d, full)


def _comparator_blocks(traj: Trajectory, seq) -> np.ndarray:
    U = as_blocks(seq, traj.dim)
    if U.shape != traj.plays.shape:
        raise ValueError(f"comparator has shape {U.shape}, trajectory has {traj.plays.shape}")
    return U


def dynamic_regret(traj: Trajectory, seq) -> float:
    """``sum_t <g_t, w_t - u_t>``."""
    U = _comparator_blocks(traj, seq)
    return float(np.sum(traj.losses * (traj.plays - U)))


def embedded_regret(traj: Trajectory, seq) -> float:
    """Static regret of the high-dimensional learner, computed in R^{dT}.

    Needs a trajectory recorded with ``debug=True``.
    """
    if traj.full_iterates is None:
        raise ValueError("trajectory has no full iterates; rerun with debug=True")
    U = _comparator_blocks(traj, seq)
    T = traj.full_iterates.shape[1]
    if T != traj.rounds:
        raise ValueError("embedded regret needs a complete run")
    u_flat = embed_comparator(U).flat
    total = 0.0
    for i in range(traj.rounds):
        g_flat = embed_loss(i + 1, traj.losses[i], T).flat
        total += float(g_flat @ (traj.full_iterates[i].reshape(-1) - u_flat))
    return total


def wealth(traj: Trajectory) -> float:
    return float(traj.wealth()[-1]) if traj.rounds else 0.0


def duality_gap(traj: Trajectory, seq) -> float:
    """``R_T(u) + Wealth_T + <sum_t g~_t, u~>``; zero up to rounding."""
    U = _comparator_blocks(traj, seq)
    return dynamic_regret(traj, U) + wealth(traj) + float(np.sum(traj.losses * U))


def regret_records(traj: Trajectory, comparators=()) -> list[RegretRecord]:
    Us = [_comparator_blocks(traj, c) for c in comparators]
    inst = [np.sum(traj.losses * (traj.plays - U), axis=1) for U in Us]
    cum = [np.cumsum(r) for r in inst]
    wl = traj.wealth()
    return [
        RegretRecord(
            t=i + 1,
            w=traj.plays[i].copy(),
            g=traj.losses[i].copy(),
            inst_regret=tuple(float(r[i]) for r in inst),
            cum_regret=tuple(float(c[i]) for c in cum),
            wealth=float(wl[i]),
            V=float(traj.V[i]),
            dual_norm=float(np.sqrt(max(traj.dual_norm_sq[i], 0.0))),
            beta=float(traj.betas[i]),
        )
        for i in range(traj.rounds)
    ]


def regret_decomposition(traj: Trajectory, seq, norm_M: float) -> tuple[float, float, float]:
    """``(R_T, 1d term, direction regret)`` with ``R_T = 1d + norm_M * direction``.

    The 1d term is ``sum_t c_t (beta_t - norm_M)`` and the direction regret
    ``sum_t c_t - <G~, u~> / norm_M``, where ``c_t`` are the scalar losses.
    """
    if norm_M <= 0:
        raise ValueError("the comparator must be nonzero")
    U = _comparator_blocks(traj, seq)
    c = traj.scalar_losses
    one_d = float(np.sum(c * (traj.betas - norm_M)))
    direction = float(np.sum(c)) - float(np.sum(traj.losses * U)) / norm_M
    return dynamic_regret(traj, U), one_d, direction
