# cython: language_level=3
"""Compiled per-round Haar kernels; same contracts as ``_fallback``."""

import numpy as np

cimport cython
from libc.math cimport sqrt, fabs, copysign


cdef inline void _support(Py_ssize_t s, int n, Py_ssize_t* cols, double* signs) noexcept nogil:
    cdef int j, shift
    cols[0] = 0
    signs[0] = 1.0
    for j in range(n):
        shift = n - j
        cols[j + 1] = (<Py_ssize_t>1 << j) + (s >> shift)
        signs[j + 1] = -1.0 if (s >> (shift - 1)) & 1 else 1.0


def row_support(Py_ssize_t s, int n, cols, signs):
    cdef Py_ssize_t c[64]
    cdef double sg[64]
    cdef int k
    _support(s, n, c, sg)
    for k in range(n + 1):
        cols[k] = c[k]
        signs[k] = sg[k]
    return n + 1


cdef inline void _gather(double[:, ::1] theta, Py_ssize_t s, int n, double* out) noexcept nogil:
    cdef Py_ssize_t c[64]
    cdef double sg[64]
    cdef Py_ssize_t d = theta.shape[1]
    cdef int k
    cdef Py_ssize_t i
    _support(s, n, c, sg)
    for i in range(d):
        out[i] = 0.0
    for k in range(n + 1):
        for i in range(d):
            out[i] += sg[k] * theta[c[k], i]


cdef inline void _scatter(double[:, ::1] theta, Py_ssize_t s, int n, const double* g) noexcept nogil:
    cdef Py_ssize_t c[64]
    cdef double sg[64]
    cdef Py_ssize_t d = theta.shape[1]
    cdef int k
    cdef Py_ssize_t i
    _support(s, n, c, sg)
    for k in range(n + 1):
        for i in range(d):
            theta[c[k], i] -= sg[k] * g[i]


def gather(double[:, ::1] theta, Py_ssize_t s, int n, double[::1] out):
    _gather(theta, s, n, &out[0])
    return n + 1


def scatter(double[:, ::1] theta, Py_ssize_t s, int n, const double[::1] g):
    _scatter(theta, s, n, &g[0])
    return n + 1


def run_kt_haar(losses, int n, double eps, double gbound):
    cdef double[:, ::1] G = np.ascontiguousarray(losses, dtype=np.float64)
    cdef Py_ssize_t T = G.shape[0]
    cdef Py_ssize_t d = G.shape[1]
    if T != (<Py_ssize_t>1 << n):
        raise ValueError(f"expected {1 << n} rounds, got {T}")
    theta_arr = np.zeros((T, d))
    plays_arr = np.zeros((T, d))
    betas_arr = np.zeros(T)
    scalar_arr = np.zeros(T)
    V_arr = np.zeros(T)
    dual_arr = np.zeros(T)
    wealth_arr = np.zeros(T)
    a_arr = np.zeros(d)
    cdef double[:, ::1] theta = theta_arr
    cdef double[:, ::1] plays = plays_arr
    cdef double[::1] betas = betas_arr
    cdef double[::1] scalar = scalar_arr
    cdef double[::1] Vh = V_arr
    cdef double[::1] dualh = dual_arr
    cdef double[::1] wealthh = wealth_arr
    cdef double[::1] a = a_arr
    cdef double wealth = eps * gbound
    cdef double grad_sum = 0.0
    cdef double V = 0.0
    cdef double dual = 0.0
    cdef double beta, den, c, gg, ag, inv, dn
    cdef Py_ssize_t s, i
    cdef long clipped = 0
    with nogil:
        for s in range(T):
            beta = grad_sum * wealth / (gbound * gbound * (s + 1))
            _gather(theta, s, n, &a[0])
            c = 0.0
            gg = 0.0
            ag = 0.0
            if V > 0.0:
                dn = dual if dual > 0.0 else 0.0
                den = sqrt(V)
                if sqrt(dn) > den:
                    den = sqrt(dn)
                for i in range(d):
                    plays[s, i] = beta * (a[i] / den)
                    c += (a[i] / den) * G[s, i]
            for i in range(d):
                gg += G[s, i] * G[s, i]
                ag += a[i] * G[s, i]
            scalar[s] = c
            if fabs(c) > gbound * (1.0 + 1e-9):
                c = copysign(gbound, c)
                clipped += 1
            wealth -= c * beta
            grad_sum -= c
            V += (1 + n) * gg
            dual += (1 + n) * gg - 2.0 * ag
            _scatter(theta, s, n, &G[s, 0])
            betas[s] = beta
            Vh[s] = V
            dualh[s] = dual
            wealthh[s] = wealth
    return {
        "plays": plays_arr,
        "betas": betas_arr,
        "scalar_losses": scalar_arr,
        "V": V_arr,
        "dual_norm_sq": dual_arr,
        "wealth_1d": wealth_arr,
        "theta": theta_arr,
        "clipped": int(clipped),
    }
