"""Pure-Python versions of the per-round Haar kernels.

Row ``s`` (0-indexed) of ``H_n`` has a ``+1`` in column 0 and, for each level
``j < n``, a ``+/-1`` in column ``2^j + (s >> (n - j))`` whose sign is the bit
``n - j - 1`` of ``s``.
"""

import math

import numpy as np


def row_support(s, n, cols, signs):
    cols[0] = 0
    signs[0] = 1.0
    for j in range(n):
        shift = n - j
        cols[j + 1] = (1 << j) + (s >> shift)
        signs[j + 1] = -1.0 if (s >> (shift - 1)) & 1 else 1.0
    return n + 1


def _support(s, n):
    cols = np.empty(n + 1, dtype=np.int64)
    signs = np.empty(n + 1)
    row_support(s, n, cols, signs)
    return cols, signs


def gather(theta, s, n, out):
    cols, signs = _support(s, n)
    out[:] = signs @ theta[cols]
    return n + 1


def scatter(theta, s, n, g):
    cols, signs = _support(s, n)
    theta[cols] -= np.outer(signs, g)
    return n + 1


def run_kt_haar(losses, n, eps, gbound):
    losses = np.ascontiguousarray(losses, dtype=float)
    T, d = losses.shape
    if T != 1 << n:
        raise ValueError(f"expected {1 << n} rounds, got {T}")
    theta = np.zeros((T, d))
    plays = np.zeros((T, d))
    betas = np.zeros(T)
    scalar = np.zeros(T)
    V_hist = np.zeros(T)
    dual_hist = np.zeros(T)
    wealth_hist = np.zeros(T)
    a = np.zeros(d)
    wealth = eps * gbound
    grad_sum = 0.0
    V = 0.0
    dual = 0.0
    clipped = 0
    for s in range(T):
        g = losses[s]
        beta = grad_sum * wealth / (gbound * gbound * (s + 1))
        gather(theta, s, n, a)
        if V > 0.0:
            den = max(math.sqrt(V), math.sqrt(max(dual, 0.0)))
            v = a / den
        else:
            v = np.zeros(d)
        plays[s] = beta * v
        c = float(v @ g)
        scalar[s] = c
        if abs(c) > gbound * (1.0 + 1e-9):
            c = math.copysign(gbound, c)
            clipped += 1
        wealth -= c * beta
        grad_sum -= c
        gg = float(g @ g)
        ag = float(a @ g)
        V += (1 + n) * gg
        dual += (1 + n) * gg - 2.0 * ag
        scatter(theta, s, n, g)
        betas[s] = beta
        V_hist[s] = V
        dual_hist[s] = dual
        wealth_hist[s] = wealth
    return {
        "plays": plays,
        "betas": betas,
        "scalar_losses": scalar,
        "V": V_hist,
        "dual_norm_sq": dual_hist,
        "wealth_1d": wealth_hist,
        "theta": theta,
        "clipped": clipped,
    }
