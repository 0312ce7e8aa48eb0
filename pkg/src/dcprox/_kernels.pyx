# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: per-sample row dot products of factor matrices and
their adjoint scatter, parallelized with deterministic segmented reductions
(results are independent of the thread count)."""

import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange

cnp.import_array()

ctypedef cnp.int64_t I64


def pair_dot(double[:, ::1] A, double[:, ::1] B, I64[::1] I, I64[::1] J,
             double[::1] out, int num_threads):
    """out[t] = <A[I[t], :], B[J[t], :]>."""
    cdef Py_ssize_t m = I.shape[0]
    cdef Py_ssize_t r = A.shape[1]
    cdef Py_ssize_t t, c
    cdef double s
    for t in prange(m, nogil=True, num_threads=num_threads, schedule='static'):
        s = 0.0
        for c in range(r):
            s = s + A[I[t], c] * B[J[t], c]
        out[t] = s


def pair_dot2(double[:, ::1] H, double[:, ::1] V, double[:, ::1] U,
              double[:, ::1] K, I64[::1] I, I64[::1] J,
              double[::1] out, int num_threads):
    """out[t] = <H[I[t], :], V[J[t], :]> + <U[I[t], :], K[J[t], :]>."""
    cdef Py_ssize_t m = I.shape[0]
    cdef Py_ssize_t r = H.shape[1]
    cdef Py_ssize_t t, c
    cdef double s
    for t in prange(m, nogil=True, num_threads=num_threads, schedule='static'):
        s = 0.0
        for c in range(r):
            s = s + H[I[t], c] * V[J[t], c] + U[I[t], c] * K[J[t], c]
        out[t] = s


def scatter_segments(double[::1] w, double[:, ::1] src, I64[::1] src_idx,
                     I64[::1] perm, I64[::1] indptr, double[:, ::1] out,
                     int num_threads):
    """out[i, :] += sum over t in segment(i) of w[t] * src[src_idx[t], :].

    Segments partition the samples by output row (``perm`` is a stable sort,
    ``indptr`` its boundaries), so each output row is owned by exactly one
    thread and the in-segment order is fixed.
    """
    cdef Py_ssize_t nrows = out.shape[0]
    cdef Py_ssize_t r = out.shape[1]
    cdef Py_ssize_t i, c
    cdef I64 p, t
    cdef double wt
    for i in prange(nrows, nogil=True, num_threads=num_threads, schedule='static'):
        for p in range(indptr[i], indptr[i + 1]):
            t = perm[p]
            wt = w[t]
            for c in range(r):
                out[i, c] += wt * src[src_idx[t], c]
