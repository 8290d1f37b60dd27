"""Unnormalized Haar basis: construction, fast transforms and path-length diagnostics.

``H_0 = (1)`` and ``H_n = [H_{n-1} (x) (1, 1)^T, I_{2^{n-1}} (x) (1, -1)^T]``.
Column ``0`` is the all-ones vector; columns ``2^j .. 2^{j+1}-1`` are the
wavelets of support ``T / 2^j``.  Every row has exactly ``1 + n`` nonzeros.
"""

from __future__ import annotations

import numpy as np

from .linalg import Preconditioner, as_blocks

__all__ = [
    "MAX_DENSE_ORDER",
    "is_power_of_two",
    "next_power_of_two",
    "log2_exact",
    "haar_matrix",
    "haar_transpose_apply",
    "haar_apply",
    "haar_column_norms_sq",
    "haar_inverse_apply",
    "haar_row",
    "hht_diag",
    "HaarPreconditioner",
    "haar_comparator_norm_sq",
    "TimescalePartition",
    "timescale_path_length",
    "interval_average_gap",
]

MAX_DENSE_ORDER = 12


def is_power_of_two(T: int) -> bool:
    return T >= 1 and (T & (T - 1)) == 0


def next_power_of_two(T: int) -> int:
    if T < 1:
        raise ValueError("T must be positive")
    return 1 << (T - 1).bit_length()


def log2_exact(T: int) -> int:
    if not is_power_of_two(T):
        raise ValueError(f"length {T} is not a power of two")
    return T.bit_length() - 1


def haar_matrix(n: int) -> np.ndarray:
    """Dense ``H_n`` of order ``2^n`` built by the Kronecker recursion."""
    if n < 0 or n > MAX_DENSE_ORDER:
        raise ValueError(f"dense Haar matrices are limited to 0 <= n <= {MAX_DENSE_ORDER}, got {n}")
    H = np.ones((1, 1))
    up = np.array([[1.0], [1.0]])
    down = np.array([[1.0], [-1.0]])
    for k in range(1, n + 1):
        H = np.hstack([np.kron(H, up), np.kron(np.eye(2 ** (k - 1)), down)])
    return H


def haar_transpose_apply(v) -> np.ndarray:
    """``H_n^T v`` in O(T) by repeated pairwise sums and differences.

    Accepts ``(T,)`` or ``(T, d)``; a 2-D input is transformed column-wise.
    """
    v = np.asarray(v, dtype=float)
    T = v.shape[0]
    log2_exact(T)
    out = np.empty_like(v)
    cur = v
    end = T
    while cur.shape[0] > 1:
        half = cur.shape[0] // 2
        out[end - half:end] = cur[0::2] - cur[1::2]
        cur = cur[0::2] + cur[1::2]
        end -= half
    out[0] = cur[0]
    return out


def haar_apply(y) -> np.ndarray:
    """``H_n y`` in O(T); the exact inverse of the recursion in :func:`haar_transpose_apply`."""
    y = np.asarray(y, dtype=float)
    T = y.shape[0]
    log2_exact(T)
    cur = y[:1].copy()
    while cur.shape[0] < T:
        half = cur.shape[0]
        detail = y[half:2 * half]
        nxt = np.empty((2 * half,) + y.shape[1:])
        nxt[0::2] = cur + detail
        nxt[1::2] = cur - detail
        cur = nxt
    return cur


def haar_column_norms_sq(n: int) -> np.ndarray:
    """Squared column norms of ``H_n`` (the diagonal of ``D_n^2``)."""
    T = 1 << n
    norms = np.empty(T)
    norms[0] = T
    for j in range(n):
        norms[1 << j:2 << j] = T >> j
    return norms


def haar_inverse_apply(v) -> np.ndarray:
    """``H_n^{-1} v = D_n^{-2} H_n^T v``."""
    v = np.asarray(v, dtype=float)
    n = log2_exact(v.shape[0])
    coeffs = haar_transpose_apply(v)
    scale = haar_column_norms_sq(n)
    return coeffs / (scale if v.ndim == 1 else scale[:, None])


def haar_row(t: int, n: int) -> dict[int, int]:
    """Nonzeros of row ``t`` of ``H_n`` as ``{column: sign}``, both 1-indexed."""
    T = 1 << n
    if not 1 <= t <= T:
        raise IndexError(f"row {t} outside [1, {T}]")
    s = t - 1
    row = {1: 1}
    for j in range(n):
        width = T >> j
        row[(1 << j) + s // width + 1] = 1 if s % width < width // 2 else -1
    return row


def hht_diag(n: int) -> int:
    """Common value of the diagonal entries of ``H_n H_n^T``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return 1 + n


class HaarPreconditioner(Preconditioner):
    """``S = (H_n H_n^T)^{-1}``, so ``S^{-1} = H_n H_n^T`` has diagonal ``1 + n``."""

    label = "haar"

    def __init__(self, order: int):
        self.n = log2_exact(order)
        super().__init__(order)
        self._norms = haar_column_norms_sq(self.n)

    def _scale(self, coeffs, power):
        w = self._norms ** power
        return coeffs * (w if coeffs.ndim == 1 else w[:, None])

    def apply(self, x):
        x = self._check(x)
        # S = H^{-T} H^{-1} = H D^{-4} H^T
        return haar_apply(self._scale(haar_transpose_apply(x), -2.0))

    def apply_inverse(self, x):
        x = self._check(x)
        return haar_apply(haar_transpose_apply(x))

    def inverse_diagonal(self):
        return np.full(self.order, float(1 + self.n))

    def inverse_abs_max(self):
        return float(1 + self.n)


def haar_comparator_norm_sq(seq) -> float:
    """``||u~||_M^2 = ||H^{-1} u~||^2`` for ``S = (H H^T)^{-1}``, in O(dT)."""
    U = as_blocks(seq)
    return float(np.sum(haar_inverse_apply(U) ** 2))


class TimescalePartition:
    """Split ``[1, T]`` into ``T / tau`` consecutive intervals of length ``tau``."""

    def __init__(self, T: int, tau: int):
        if not is_power_of_two(tau) or tau > T or T % tau:
            raise ValueError(f"tau={tau} must be a power of two dividing T={T}")
        self.T = T
        self.tau = tau

    @property
    def count(self) -> int:
        return self.T // self.tau

    @property
    def intervals(self) -> list[tuple[int, int]]:
        """Inclusive 1-indexed ``(start, end)`` pairs."""
        return [(i * self.tau + 1, (i + 1) * self.tau) for i in range(self.count)]

    def averages(self, seq) -> np.ndarray:
        U = as_blocks(seq)
        if U.shape[0] != self.T:
            raise ValueError(f"sequence has length {U.shape[0]}, partition expects {self.T}")
        return U.reshape(self.count, self.tau, U.shape[1]).mean(axis=1)


def timescale_path_length(seq, tau: int) -> float:
    """Squared differences between paired length-``tau`` interval averages.

    ``tau == T`` returns the squared norm of the overall average.
    """
    U = as_blocks(seq)
    avg = TimescalePartition(U.shape[0], tau).averages(U)
    if tau == U.shape[0]:
        return float(np.sum(avg[0] ** 2))
    return float(np.sum((avg[0::2] - avg[1::2]) ** 2))


def interval_average_gap(seq) -> float:
    """Largest distance between adjacent interval averages over all dyadic timescales."""
    U = as_blocks(seq)
    T = U.shape[0]
    log2_exact(T)
    gap = 0.0
    tau = 1
    while tau < T:
        avg = TimescalePartition(T, tau).averages(U)
        gap = max(gap, float(np.sqrt(np.sum(np.diff(avg, axis=0) ** 2, axis=1)).max()))
        tau *= 2
    return gap
