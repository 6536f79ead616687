# cython: language_level=3
"""Compiled implementations of the hot kernels (see _fallback for the
reference semantics)."""

from libc.math cimport pow, tgamma

import numpy as np

cimport numpy as cnp

cnp.import_array()


def caputo_l1_apply(values, double beta, double dt):
    values = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t m = values.shape[0] - 1
    if m < 1:
        raise ValueError("need at least two samples")
    if not (0.0 < beta <= 1.0):
        raise ValueError(f"order must lie in (0, 1], got {beta}")

    cdef cnp.ndarray[cnp.float64_t, ndim=1] vals = values
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(m + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dphi = np.empty(m)
    cdef Py_ssize_t k, n
    cdef double acc, scale

    for k in range(m):
        b[k] = pow(k + 1.0, 1.0 - beta) - pow(<double> k, 1.0 - beta)
        dphi[k] = vals[k + 1] - vals[k]
    b[0] = 1.0  # pow(0, 0) is 1 and would cancel the k=0 weight at beta=1
    scale = pow(dt, -beta) / tgamma(2.0 - beta)
    out[0] = 0.0
    for n in range(1, m + 1):
        acc = 0.0
        for k in range(n):
            acc += b[k] * dphi[n - 1 - k]
        out[n] = acc * scale
    return out


def pairwise_repulsion_sum(x, y, w):
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)

    cdef cnp.ndarray[cnp.float64_t, ndim=2] xv = x
    cdef cnp.ndarray[cnp.float64_t, ndim=2] yv = y
    cdef cnp.ndarray[cnp.float64_t, ndim=1] wv = w
    cdef Py_ssize_t n = xv.shape[0], m = yv.shape[0], d = xv.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n, d))
    cdef Py_ssize_t i, j, k
    cdef double norm2, diff, factor

    for i in range(n):
        for j in range(m):
            norm2 = 0.0
            for k in range(d):
                diff = xv[i, k] - yv[j, k]
                norm2 += diff * diff
            factor = wv[j] / (1.0 + norm2)
            for k in range(d):
                out[i, k] += factor * (xv[i, k] - yv[j, k])
    return out
