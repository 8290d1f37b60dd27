"""Parameter-free learners for the embedded (dT-dimensional) problem.

The combined learner factors each play as ``W_t = beta_t * v_t``: a scalar
coin-betting learner picks the magnitude ``beta_t`` and a scale-free FTRL
learner on the unit ``||.||_M`` ball picks the direction ``v_t``.  Only block
``t`` of ``W_t`` is ever played, so learners expose ``predict() -> w_t`` and
``update(g_t)`` on R^d.

Three implementations share that interface:

* :class:`Reducer` works for any :class:`~dynreg.linalg.Preconditioner`,
  keeping ``S^{-1} G`` up to date with one structured solve per round.
* :class:`DenseOracleReducer` recomputes everything from a dense ``S^{-1}``
  every round.  It is slow and exists to check the other two.
* :class:`FastHaarReducer` implements ``S = (H H^T)^{-1}`` in O(d log T) per
  round using the row sparsity of the Haar matrix.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from . import _backend
from .haar import HaarPreconditioner, haar_apply, haar_matrix, log2_exact
from .linalg import (
    DenseSPD,
    DifferencePreconditioner,
    IdentityPreconditioner,
    Preconditioner,
    lipschitz_bound,
)

__all__ = [
    "RoundOverflowError",
    "KTBettor",
    "DirectionLearner",
    "Reducer",
    "DenseOracleReducer",
    "FastHaarReducer",
    "scalar_loss_bound",
    "ZeroPlayer",
    "make_reducer",
]

log = logging.getLogger(__name__)


class RoundOverflowError(IndexError):
    """Raised when a learner is asked to play past its horizon."""


class KTBettor:
    """Krichevsky-Trofimov coin betting for scalar losses in ``[-gbound, gbound]``.

    Starts with wealth ``eps * gbound`` and bets the fraction
    ``(sum of past rewards) / (gbound * t)`` of its wealth, scaled by
    ``1 / gbound``.  The bet never exceeds ``wealth / gbound`` in magnitude, so
    wealth stays positive.
    """

    def __init__(self, eps: float = 1.0, gbound: float = 1.0):
        if eps <= 0 or gbound <= 0:
            raise ValueError("eps and gbound must be positive")
        self.eps = float(eps)
        self.gbound = float(gbound)
        self.wealth = self.eps * self.gbound
        self.grad_sum = 0.0
        self.count = 0
        self.clipped = 0

    def predict(self) -> float:
        return self.grad_sum * self.wealth / (self.gbound * self.gbound * (self.count + 1))

    def update(self, c: float) -> None:
        c = float(c)
        if abs(c) > self.gbound * (1.0 + 1e-9):
            log.warning("clipping scalar loss %.6g to bound %.6g", c, self.gbound)
            c = math.copysign(self.gbound, c)
            self.clipped += 1
        beta = self.predict()
        self.wealth -= c * beta
        self.grad_sum -= c
        self.count += 1


class DirectionLearner:
    """Projected scale-free FTRL on the unit ball of ``||.||_M``.

    The direction is ``-S^{-1} G / max(sqrt(V), ||G||_{M^-1})`` where ``G`` is
    the running sum of embedded losses and ``V`` the running sum of their
    squared dual norms.  ``S^{-1} G`` is maintained incrementally.
    """

    def __init__(self, precond: Preconditioner, d: int):
        self.precond = precond
        self.d = int(d)
        T = precond.order
        self.grad_accum = np.zeros((T, self.d))
        self.precond_accum = np.zeros((T, self.d))
        self._inv_diag = precond.inverse_diagonal()
        self.V = 0.0
        self.dual_norm_sq = 0.0

    def _denominator(self) -> float:
        return max(math.sqrt(self.V), math.sqrt(max(self.dual_norm_sq, 0.0)))

    def direction(self) -> np.ndarray:
        """Full direction in R^{dT} as a ``(T, d)`` array."""
        if self.V == 0.0:
            return np.zeros_like(self.precond_accum)
        return -self.precond_accum / self._denominator()

    def direction_block(self, t: int) -> np.ndarray:
        if self.V == 0.0:
            return np.zeros(self.d)
        return -self.precond_accum[t - 1] / self._denominator()

    def update(self, t: int, g: np.ndarray) -> None:
        e = np.zeros_like(self.grad_accum)
        e[t - 1] = g
        col = self.precond.apply_inverse(e)
        gg = float(g @ g)
        self_term = self._inv_diag[t - 1] * gg
        cross = float(self.precond_accum[t - 1] @ g)
        self.V += self_term
        self.dual_norm_sq += self_term + 2.0 * cross
        self.precond_accum += col
        self.grad_accum[t - 1] += g


def scalar_loss_bound(precond: Preconditioner, G: float) -> float:
    """Bound on ``|<v_t, e_t (x) g_t>|`` handed to the scalar learner.

    ``G * max|S^{-1}_ij|``, raised to ``G * sqrt(max_t S^{-1}_tt)`` when the
    inverse has entries below one (the latter is what Cauchy-Schwarz needs).
    """
    return max(lipschitz_bound(precond, G), G * math.sqrt(float(np.max(precond.inverse_diagonal()))))


class _BettingReducer:
    """Shared bookkeeping: round counter, pending play, diagnostics."""

    def __init__(self, T: int, d: int, G: float, eps: float, gbound: float, bettor=None):
        if d < 1:
            raise ValueError("d must be positive")
        if G <= 0:
            raise ValueError("G must be positive")
        self.horizon = int(T)
        self.dim = int(d)
        self.G = float(G)
        self.eps = float(eps)
        self.gbound = float(gbound)
        self.bettor = bettor if bettor is not None else KTBettor(eps, gbound)
        self.t = 0
        self.beta = 0.0
        self.last_direction = np.zeros(self.dim)
        self.last_scalar_loss = 0.0
        self._pending = None

    def predict(self) -> np.ndarray:
        if self.t >= self.horizon:
            raise RoundOverflowError(f"horizon {self.horizon} exhausted")
        if self._pending is None:
            self.beta = self.bettor.predict()
            self.last_direction = self._direction_block()
            self._pending = self.beta * self.last_direction
        return self._pending.copy()

    def update(self, g) -> None:
        if self._pending is None:
            self.predict()
        g = np.atleast_1d(np.asarray(g, dtype=float))
        if g.shape != (self.dim,):
            raise ValueError(f"loss has shape {g.shape}, expected ({self.dim},)")
        c = float(self.last_direction @ g)
        self.last_scalar_loss = c
        self.bettor.update(c)
        self._absorb(g)
        self.t += 1
        self._pending = None

    def step(self, g):
        """Play, observe ``g``, update; returns the play."""
        w = self.predict()
        self.update(g)
        return w

    @property
    def wealth_1d(self) -> float:
        return self.bettor.wealth

    def full_play(self) -> np.ndarray:
        """The whole high-dimensional iterate ``beta_t v_t`` for the pending round."""
        self.predict()
        return self.beta * self.full_direction()

    def _direction_block(self) -> np.ndarray:
        raise NotImplementedError

    def _absorb(self, g: np.ndarray) -> None:
        raise NotImplementedError

    def full_direction(self) -> np.ndarray:
        raise NotImplementedError


class Reducer(_BettingReducer):
    """Coin betting times FTRL direction, for any preconditioner."""

    def __init__(self, precond: Preconditioner, d: int = 1, G: float = 1.0, eps: float = 1.0, bettor=None):
        super().__init__(precond.order, d, G, eps, scalar_loss_bound(precond, G), bettor)
        self.precond = precond
        self.direction = DirectionLearner(precond, d)

    @property
    def V(self) -> float:
        return self.direction.V

    @property
    def dual_norm_sq(self) -> float:
        return self.direction.dual_norm_sq

    def _direction_block(self):
        return self.direction.direction_block(self.t + 1)

    def _absorb(self, g):
        self.direction.update(self.t + 1, g)

    def full_direction(self):
        return self.direction.direction()


def _dense_inverse_for(precond: Preconditioner) -> np.ndarray:
    # built from first principles, not from precond.apply_inverse
    T = precond.order
    if isinstance(precond, HaarPreconditioner):
        H = haar_matrix(precond.n)
        return H @ H.T
    if isinstance(precond, DifferencePreconditioner):
        sigma = np.eye(T) - np.eye(T, k=1)
        return np.linalg.inv(sigma.T @ sigma)
    if isinstance(precond, IdentityPreconditioner):
        return np.eye(T)
    if isinstance(precond, DenseSPD):
        return np.linalg.inv(precond.entries)
    return np.linalg.inv(precond.dense())


class DenseOracleReducer(_BettingReducer):
    """Reference reducer: dense ``S^{-1}``, quantities recomputed from scratch."""

    def __init__(self, S_inv, d: int = 1, G: float = 1.0, eps: float = 1.0, gbound: float | None = None, bettor=None):
        S_inv = np.array(S_inv, dtype=float)
        if S_inv.ndim != 2 or S_inv.shape[0] != S_inv.shape[1]:
            raise ValueError("S_inv must be square")
        if gbound is None:
            gbound = max(G * np.abs(S_inv).max(), G * math.sqrt(np.diag(S_inv).max()))
        super().__init__(S_inv.shape[0], d, G, eps, gbound, bettor)
        self.S_inv = S_inv
        self.grad_accum = np.zeros((self.horizon, self.dim))
        self.V = 0.0

    @classmethod
    def from_preconditioner(cls, precond: Preconditioner, d: int = 1, G: float = 1.0, eps: float = 1.0):
        return cls(_dense_inverse_for(precond), d, G, eps)

    @property
    def dual_norm_sq(self) -> float:
        return float(np.sum(self.grad_accum * (self.S_inv @ self.grad_accum)))

    def full_direction(self):
        if self.V == 0.0:
            return np.zeros((self.horizon, self.dim))
        theta = -(self.S_inv @ self.grad_accum)
        den = max(math.sqrt(self.V), math.sqrt(max(self.dual_norm_sq, 0.0)))
        return theta / den

    def _direction_block(self):
        return self.full_direction()[self.t]

    def _absorb(self, g):
        self.V += self.S_inv[self.t, self.t] * float(g @ g)
        self.grad_accum[self.t] += g


class FastHaarReducer(_BettingReducer):
    """``S = (H_n H_n^T)^{-1}`` with O(d log T) work per round.

    Keeps ``theta_hat = -(H^T (x) I) G`` in Haar coefficient space.  Block ``t``
    of ``-S^{-1} G = (H (x) I) theta_hat`` touches the ``1 + n`` coefficients
    in row ``t`` of ``H``, and so does the update ``theta_hat -= h_t (x) g_t``.
    ``V`` grows by ``(1 + n) ||g_t||^2`` and the squared dual norm of ``G`` by
    ``(1 + n) ||g_t||^2 - 2 <a_t, g_t>`` with ``a_t`` the gathered block.
    """

    def __init__(self, T: int, d: int = 1, G: float = 1.0, eps: float = 1.0, backend: str | None = None, bettor=None):
        n = log2_exact(T)
        super().__init__(T, d, G, eps, G * (1 + n), bettor)
        self.n = n
        self.kernels = _backend.get_backend(backend)
        self.theta_hat = np.zeros((T, self.dim))
        self.V = 0.0
        self.dual_norm_sq = 0.0
        self.touched_columns = 0
        self._gathered = np.zeros(self.dim)

    @property
    def Lambda(self) -> np.ndarray:
        """``sum_{i<t} g_i h_i^T`` as a ``(d, T)`` array; equals ``-theta_hat^T``."""
        return -self.theta_hat.T

    def _direction_block(self):
        self.kernels.gather(self.theta_hat, self.t, self.n, self._gathered)
        if self.V == 0.0:
            return np.zeros(self.dim)
        den = max(math.sqrt(self.V), math.sqrt(max(self.dual_norm_sq, 0.0)))
        return self._gathered / den

    def _absorb(self, g):
        gg = float(g @ g)
        ag = float(self._gathered @ g)
        self.V += (1 + self.n) * gg
        self.dual_norm_sq += (1 + self.n) * gg - 2.0 * ag
        g = np.ascontiguousarray(g)
        self.touched_columns = self.kernels.scatter(self.theta_hat, self.t, self.n, g)

    def full_direction(self):
        if self.V == 0.0:
            return np.zeros((self.horizon, self.dim))
        den = max(math.sqrt(self.V), math.sqrt(max(self.dual_norm_sq, 0.0)))
        return haar_apply(self.theta_hat) / den

    def run(self, losses) -> dict:
        """Play a whole precomputed loss sequence inside the kernel.

        Only valid on a fresh learner with the default KT bettor.  Returns the
        per-round arrays produced by the kernel and leaves the learner in its
        final state.
        """
        if self.t != 0:
            raise RuntimeError("run() needs a fresh learner")
        if not isinstance(self.bettor, KTBettor):
            raise TypeError("run() is only available with the built-in KT bettor")
        losses = np.asarray(losses, dtype=float).reshape(self.horizon, self.dim)
        out = self.kernels.run_kt_haar(losses, self.n, self.eps, self.gbound)
        self.theta_hat = out["theta"]
        self.V = float(out["V"][-1])
        self.dual_norm_sq = float(out["dual_norm_sq"][-1])
        self.bettor.wealth = float(out["wealth_1d"][-1])
        self.bettor.grad_sum = -float(np.sum(out["scalar_losses"]))
        self.bettor.count = self.horizon
        self.bettor.clipped = out["clipped"]
        self.beta = float(out["betas"][-1])
        self.last_scalar_loss = float(out["scalar_losses"][-1])
        self.touched_columns = self.n + 1
        self.t = self.horizon
        return out


class ZeroPlayer:
    """Baseline that always plays the origin."""

    def __init__(self, T: int, d: int = 1, G: float = 1.0, eps: float = 1.0):
        self.horizon = int(T)
        self.dim = int(d)
        self.gbound = float(G)
        self.eps = float(eps)
        self.bettor = KTBettor(eps, G)
        self.t = 0
        self.beta = 0.0
        self.last_scalar_loss = 0.0
        self.V = 0.0
        self.dual_norm_sq = 0.0
        self.wealth_1d = 0.0

    def predict(self) -> np.ndarray:
        if self.t >= self.horizon:
            raise RoundOverflowError(f"horizon {self.horizon} exhausted")
        return np.zeros(self.dim)

    def update(self, g) -> None:
        self.predict()
        self.t += 1


def make_reducer(precond: Preconditioner, d: int = 1, G: float = 1.0, eps: float = 1.0, fast: bool = True):
    """Fast Haar path for Haar preconditioners, generic reducer otherwise."""
    if fast and isinstance(precond, HaarPreconditioner):
        return FastHaarReducer(precond.order, d, G, eps)
    return Reducer(precond, d, G, eps)
