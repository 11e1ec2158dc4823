# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels: monomial evaluation over point
clouds, weighted moment accumulation and polynomial evaluation.

Parallel loops run over fixed-size chunks of points; per-chunk partial sums
are combined afterwards in a fixed pairwise order, so results do not depend
on the thread count.
"""

import numpy as np

from cython.parallel cimport prange
from libc.stdlib cimport malloc, free

from ._kernels_py import CHUNK, pairwise_rows

ctypedef long long idx_t


cdef inline void _fill(const double[:, ::1] pts, Py_ssize_t i,
                       const idx_t[::1] parent, const idx_t[::1] var,
                       double* buf, Py_ssize_t T) noexcept nogil:
    cdef Py_ssize_t k
    buf[0] = 1.0
    for k in range(1, T):
        buf[k] = buf[parent[k]] * pts[i, var[k]]


def monomial_matrix(pts, parent, var, int nthreads=1):
    cdef const double[:, ::1] P = np.ascontiguousarray(pts, dtype=np.float64)
    cdef const idx_t[::1] par = np.ascontiguousarray(parent, dtype=np.int64)
    cdef const idx_t[::1] v = np.ascontiguousarray(var, dtype=np.int64)
    cdef Py_ssize_t N = P.shape[0], T = par.shape[0], i, k
    out = np.empty((N, T))
    cdef double[:, ::1] O = out
    for i in prange(N, nogil=True, num_threads=nthreads, schedule="static"):
        O[i, 0] = 1.0
        for k in range(1, T):
            O[i, k] = O[i, par[k]] * P[i, v[k]]
    return out


def weighted_moments(pts, weights, parent, var, int nthreads=1):
    cdef const double[:, ::1] P = np.ascontiguousarray(pts, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const idx_t[::1] par = np.ascontiguousarray(parent, dtype=np.int64)
    cdef const idx_t[::1] v = np.ascontiguousarray(var, dtype=np.int64)
    cdef Py_ssize_t N = P.shape[0], T = par.shape[0]
    cdef Py_ssize_t chunk = CHUNK
    cdef Py_ssize_t nchunks = (N + chunk - 1) // chunk
    cdef Py_ssize_t c, i, k, lo, hi
    cdef double wi
    cdef double* buf
    if nchunks == 0:
        return np.zeros(T)
    parts = np.zeros((nchunks, T))
    cdef double[:, ::1] acc = parts
    for c in prange(nchunks, nogil=True, num_threads=nthreads, schedule="static"):
        buf = <double*> malloc(T * sizeof(double))
        lo = c * chunk
        hi = lo + chunk
        if hi > N:
            hi = N
        for i in range(lo, hi):
            _fill(P, i, par, v, buf, T)
            wi = w[i]
            for k in range(T):
                acc[c, k] += wi * buf[k]
        free(buf)
    return pairwise_rows(parts)


def poly_eval(pts, parent, var, coeffs, int nthreads=1):
    cdef const double[:, ::1] P = np.ascontiguousarray(pts, dtype=np.float64)
    cdef const idx_t[::1] par = np.ascontiguousarray(parent, dtype=np.int64)
    cdef const idx_t[::1] v = np.ascontiguousarray(var, dtype=np.int64)
    cdef const double[::1] th = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef Py_ssize_t N = P.shape[0], T = par.shape[0]
    cdef Py_ssize_t chunk = CHUNK
    cdef Py_ssize_t nchunks = (N + chunk - 1) // chunk
    cdef Py_ssize_t c, i, k, lo, hi
    cdef double s
    cdef double* buf
    out = np.empty(N)
    cdef double[::1] O = out
    for c in prange(nchunks, nogil=True, num_threads=nthreads, schedule="static"):
        buf = <double*> malloc(T * sizeof(double))
        lo = c * chunk
        hi = lo + chunk
        if hi > N:
            hi = N
        for i in range(lo, hi):
            _fill(P, i, par, v, buf, T)
            s = 0.0
            for k in range(T):
                s = s + th[k] * buf[k]
            O[i] = s
        free(buf)
    return out
