# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the per-step kernels (see ``_ref`` for contracts)."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def rls_gain(const double[:, ::1] K, const double[::1] phi):
    cdef Py_ssize_t n = K.shape[0]
    cdef cnp.ndarray[double, ndim=1] p = np.empty(n, dtype=np.float64)
    cdef double[::1] pv = p
    cdef double denom = 1.0
    cdef double acc
    cdef Py_ssize_t i, j
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += K[i, j] * phi[j]
        pv[i] = acc
        denom += phi[i] * acc
    for i in range(n):
        pv[i] /= denom
    return p


def sm_downdate(const double[:, ::1] M, const double[::1] g):
    cdef Py_ssize_t n = M.shape[0]
    cdef cnp.ndarray[double, ndim=1] Mg = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] out = np.empty((n, n), dtype=np.float64)
    cdef double[::1] mg = Mg
    cdef double[:, ::1] ov = out
    cdef double alpha = 1.0
    cdef double acc, hi, lo
    cdef Py_ssize_t i, j
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += M[i, j] * g[j]
        mg[i] = acc
        alpha += g[i] * acc
    for i in range(n):
        ov[i, i] = M[i, i] - mg[i] * mg[i] / alpha
        for j in range(i + 1, n):
            hi = M[i, j] - mg[i] * mg[j] / alpha
            lo = M[j, i] - mg[j] * mg[i] / alpha
            hi = 0.5 * (hi + lo)
            ov[i, j] = hi
            ov[j, i] = hi
    return out, alpha


def rls_gain_downdate(const double[:, ::1] K, const double[::1] phi):
    cdef Py_ssize_t n = K.shape[0]
    cdef cnp.ndarray[double, ndim=1] p = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] out = np.empty((n, n), dtype=np.float64)
    cdef double[::1] pv = p
    cdef double[:, ::1] ov = out
    cdef double denom = 1.0
    cdef double acc, hi, lo
    cdef Py_ssize_t i, j
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += K[i, j] * phi[j]
        pv[i] = acc
        denom += phi[i] * acc
    for i in range(n):
        ov[i, i] = K[i, i] - pv[i] * pv[i] / denom
        for j in range(i + 1, n):
            hi = K[i, j] - pv[i] * pv[j] / denom
            lo = K[j, i] - pv[j] * pv[i] / denom
            hi = 0.5 * (hi + lo)
            ov[i, j] = hi
            ov[j, i] = hi
    for i in range(n):
        pv[i] /= denom
    return p, out
