"""Kronecker-structured vectors, weighted norms and the difference operator.

Vectors in R^{dT} are stored as ``(T, d)`` arrays: row ``t`` is the round-``t``
block, so the row-major flat view puts block ``t`` coordinate ``j`` at flat
index ``d*(t-1) + j``.  A preconditioner ``S`` is a ``T x T`` SPD matrix acting
on sequences through ``M = S (x) I_d``, i.e. ``S`` is applied to the block
axis of the ``(T, d)`` array and never expanded to ``dT x dT``.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "EmbeddedVector",
    "Preconditioner",
    "IdentityPreconditioner",
    "DenseSPD",
    "DifferenceOperator",
    "DifferencePreconditioner",
    "as_blocks",
    "embed_loss",
    "embed_comparator",
    "weighted_norm_sq",
    "dual_norm_sq",
    "difference_M_inverse_entry",
    "difference_trace_inverse",
    "lipschitz_bound",
    "dump_matrix",
    "load_matrix",
]


class EmbeddedVector:
    """A vector of R^{dT} viewed as ``T`` blocks of length ``d``."""

    __slots__ = ("_blocks",)

    def __init__(self, blocks):
        blocks = np.array(blocks, dtype=float)
        if blocks.ndim == 1:
            blocks = blocks[:, None]
        if blocks.ndim != 2 or blocks.shape[0] < 1 or blocks.shape[1] < 1:
            raise ValueError(f"expected a non-empty (T, d) array, got shape {blocks.shape}")
        blocks.setflags(write=False)
        self._blocks = blocks

    @classmethod
    def from_flat(cls, flat, d: int) -> "EmbeddedVector":
        flat = np.asarray(flat, dtype=float).ravel()
        if d < 1 or flat.size % d:
            raise ValueError(f"length {flat.size} is not a multiple of d={d}")
        return cls(flat.reshape(-1, d))

    @property
    def blocks(self) -> np.ndarray:
        return self._blocks

    @property
    def length(self) -> int:
        return self._blocks.shape[0]

    @property
    def dim(self) -> int:
        return self._blocks.shape[1]

    @property
    def flat(self) -> np.ndarray:
        return self._blocks.reshape(-1)

    def block(self, t: int) -> np.ndarray:
        """Block ``t`` (1-indexed)."""
        if not 1 <= t <= self.length:
            raise IndexError(f"block index {t} outside [1, {self.length}]")
        return self._blocks[t - 1]

    def __len__(self) -> int:
        return self._blocks.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.flat, dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, EmbeddedVector):
            return NotImplemented
        return self._blocks.shape == other._blocks.shape and np.array_equal(self._blocks, other._blocks)

    def __repr__(self):
        return f"EmbeddedVector(T={self.length}, d={self.dim})"


def as_blocks(x, d: int | None = None) -> np.ndarray:
    """Coerce an EmbeddedVector, ``(T, d)`` array or flat vector to ``(T, d)``."""
    if isinstance(x, EmbeddedVector):
        return x.blocks
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        return x
    if x.ndim == 1:
        d = 1 if d is None else d
        if x.size % d:
            raise ValueError(f"length {x.size} is not a multiple of d={d}")
        return x.reshape(-1, d)
    raise ValueError(f"cannot interpret shape {x.shape} as a block vector")


def embed_loss(t: int, g, T: int) -> EmbeddedVector:
    """Place the round-``t`` loss in block ``t`` of R^{dT} (``e_t (x) g``)."""
    if not 1 <= t <= T:
        raise IndexError(f"round {t} outside [1, {T}]")
    g = np.atleast_1d(np.asarray(g, dtype=float))
    blocks = np.zeros((T, g.size))
    blocks[t - 1] = g
    return EmbeddedVector(blocks)


def embed_comparator(seq) -> EmbeddedVector:
    """Concatenate a comparator sequence ``u_1, ..., u_T`` into one vector."""
    rows = [np.atleast_1d(np.asarray(u, dtype=float)) for u in seq]
    if not rows:
        raise ValueError("comparator sequence is empty")
    return EmbeddedVector(np.vstack(rows))


class Preconditioner:
    """SPD ``T x T`` matrix ``S`` defining the pair (||.||_M, ||.||_{M^-1}).

    Subclasses apply ``S`` and ``S^{-1}`` along axis 0 of a ``(T,)`` or
    ``(T, d)`` array.  ``dense`` exists for oracle tests only.
    """

    label = "generic"

    def __init__(self, order: int):
        if order < 1:
            raise ValueError("order must be a positive integer")
        self.order = int(order)

    def apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def apply_inverse(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def inverse_diagonal(self) -> np.ndarray:
        raise NotImplementedError

    def inverse_abs_max(self) -> float:
        """Largest absolute entry of ``S^{-1}``."""
        raise NotImplementedError

    def dense(self) -> np.ndarray:
        return self.apply(np.eye(self.order))

    def dense_inverse(self) -> np.ndarray:
        return self.apply_inverse(np.eye(self.order))

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.order:
            raise ValueError(f"vector has {x.shape[0]} blocks, preconditioner order is {self.order}")
        return x


class IdentityPreconditioner(Preconditioner):
    label = "identity"

    def apply(self, x):
        return self._check(x).copy()

    def apply_inverse(self, x):
        return self._check(x).copy()

    def inverse_diagonal(self):
        return np.ones(self.order)

    def inverse_abs_max(self):
        return 1.0


class DenseSPD(Preconditioner):
    """Explicit SPD matrix, validated on construction."""

    label = "dense"

    def __init__(self, entries, *, label: str | None = None):
        S = np.array(entries, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {S.shape}")
        super().__init__(S.shape[0])
        fro = np.linalg.norm(S)
        if np.linalg.norm(S - S.T) > 1e-12 * max(fro, 1.0):
            raise ValueError("matrix is not symmetric")
        S = 0.5 * (S + S.T)
        lam_min = np.linalg.eigvalsh(S)[0]
        if lam_min <= 1e-10 * fro:
            raise ValueError(f"matrix is not positive definite (smallest eigenvalue {lam_min:.3e})")
        S.setflags(write=False)
        self.entries = S
        self._inv = np.linalg.inv(S)
        self._inv = 0.5 * (self._inv + self._inv.T)
        self._inv.setflags(write=False)
        if label is not None:
            self.label = label

    def apply(self, x):
        return self.entries @ self._check(x)

    def apply_inverse(self, x):
        return self._inv @ self._check(x)

    def inverse_diagonal(self):
        return np.diag(self._inv).copy()

    def inverse_abs_max(self):
        return float(np.abs(self._inv).max())

    def dense(self):
        return self.entries.copy()

    def dense_inverse(self):
        return self._inv.copy()


class DifferenceOperator:
    """Finite-difference matrix: 1 on the diagonal, -1 on the first superdiagonal.

    ``(Sigma u)_t = u_t - u_{t+1}`` for ``t < T`` and ``(Sigma u)_T = u_T``.
    Its inverse is the upper-triangular all-ones matrix.
    """

    def __init__(self, order: int):
        if order < 1:
            raise ValueError("order must be a positive integer")
        self.order = int(order)

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        y = x.copy()
        y[:-1] -= x[1:]
        return y

    def apply_transpose(self, x):
        x = np.asarray(x, dtype=float)
        y = x.copy()
        y[1:] -= x[:-1]
        return y

    def apply_inverse(self, x):
        # upper-triangular ones: suffix sums
        x = np.asarray(x, dtype=float)
        return np.cumsum(x[::-1], axis=0)[::-1]

    def apply_inverse_transpose(self, x):
        return np.cumsum(np.asarray(x, dtype=float), axis=0)

    def dense(self) -> np.ndarray:
        T = self.order
        return np.eye(T) - np.eye(T, k=1)

    def dense_inverse(self) -> np.ndarray:
        return np.triu(np.ones((self.order, self.order)))


class DifferencePreconditioner(Preconditioner):
    """``S = Sigma^T Sigma``; ``||u~||_M^2 = ||u_T||^2 + sum_t ||u_t - u_{t+1}||^2``."""

    label = "difference"

    def __init__(self, order: int):
        super().__init__(order)
        self.sigma = DifferenceOperator(order)

    def apply(self, x):
        x = self._check(x)
        return self.sigma.apply_transpose(self.sigma.apply(x))

    def apply_inverse(self, x):
        x = self._check(x)
        return self.sigma.apply_inverse(self.sigma.apply_inverse_transpose(x))

    def inverse_diagonal(self):
        return np.arange(self.order, 0, -1, dtype=float)

    def inverse_abs_max(self):
        return float(self.order)

    def dense_inverse(self):
        idx = np.arange(1, self.order + 1)
        return (self.order - np.maximum.outer(idx, idx) + 1).astype(float)


def weighted_norm_sq(x, S: Preconditioner) -> float:
    """``<x, (S (x) I_d) x>`` without forming the ``dT x dT`` matrix."""
    X = as_blocks(x)
    if X.shape[0] != S.order:
        raise ValueError(f"vector has {X.shape[0]} blocks, preconditioner order is {S.order}")
    return float(np.sum(X * S.apply(X)))


def dual_norm_sq(x, S: Preconditioner) -> float:
    """``<x, (S^{-1} (x) I_d) x>``."""
    X = as_blocks(x)
    if X.shape[0] != S.order:
        raise ValueError(f"vector has {X.shape[0]} blocks, preconditioner order is {S.order}")
    return float(np.sum(X * S.apply_inverse(X)))


def difference_M_inverse_entry(i: int, j: int, T: int) -> int:
    """Entry ``(i, j)`` of ``(Sigma^T Sigma)^{-1}`` (1-indexed)."""
    if not (1 <= i <= T and 1 <= j <= T):
        raise IndexError(f"({i}, {j}) outside a {T}x{T} matrix")
    return T - max(i, j) + 1


def difference_trace_inverse(T: int) -> int:
    if T < 1:
        raise ValueError("T must be positive")
    return T * (T + 1) // 2


def lipschitz_bound(S, G: float) -> float:
    """``G`` times the largest absolute entry of ``S^{-1}``.

    ``S`` may be a :class:`Preconditioner` or a dense square array.
    """
    if G <= 0:
        raise ValueError("G must be positive")
    if isinstance(S, Preconditioner):
        return G * S.inverse_abs_max()
    S = np.asarray(S, dtype=float)
    try:
        inv = np.linalg.inv(S)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("preconditioner is singular") from exc
    if not np.all(np.isfinite(inv)) or np.linalg.cond(S) > 1e14:
        raise np.linalg.LinAlgError("preconditioner is singular")
    return G * float(np.abs(inv).max())


def dump_matrix(path, A, d: int = 1) -> None:
    """Write ``A`` as text: a ``"T d"`` header line, then one row per line."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    lines = [f"{A.shape[0]} {d}"]
    lines += [" ".join(format(v, ".17g") for v in row) for row in A]
    with open(os.fspath(path), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_matrix(path) -> tuple[np.ndarray, int]:
    with open(os.fspath(path)) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: header must be 'T d'")
        T, d = int(header[0]), int(header[1])
        rows = [list(map(float, line.split())) for line in fh if line.strip()]
    A = np.array(rows, dtype=float)
    if A.shape != (T, T):
        raise ValueError(f"{path}: expected {T}x{T} rows, got {A.shape}")
    return A, d
