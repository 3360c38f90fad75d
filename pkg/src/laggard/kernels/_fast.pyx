# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels for the tree sampler inner loop."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


def interval_sums(const double[:, ::1] cumsum, const long[::1] lo, const long[::1] hi):
    cdef Py_ssize_t n = cumsum.shape[0]
    cdef Py_ssize_t C = lo.shape[0]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((n, C), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, c
    for i in range(n):
        for c in range(C):
            o[i, c] = cumsum[i, hi[c]] - cumsum[i, lo[c] - 1]
    return out


def gram_moment(const double[:, ::1] U, const double[::1] w, const double[::1] r):
    cdef Py_ssize_t n = U.shape[0]
    cdef Py_ssize_t K = U.shape[1]
    cdef cnp.ndarray[double, ndim=2] gram = np.zeros((K, K), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] mom = np.zeros(K, dtype=np.float64)
    cdef double[:, ::1] g = gram
    cdef double[::1] m = mom
    cdef Py_ssize_t i, a, b
    cdef double wi, ua
    for i in range(n):
        wi = w[i]
        for a in range(K):
            ua = wi * U[i, a]
            m[a] += ua * r[i]
            for b in range(a, K):
                g[a, b] += ua * U[i, b]
    for a in range(K):
        for b in range(a + 1, K):
            g[b, a] = g[a, b]
    return gram, mom


def add_block(double[:, ::1] grid, Py_ssize_t lo1, Py_ssize_t hi1,
              Py_ssize_t lo2, Py_ssize_t hi2, double value):
    cdef Py_ssize_t i, j
    for i in range(lo1 - 1, hi1):
        for j in range(lo2 - 1, hi2):
            grid[i, j] += value
    return None
