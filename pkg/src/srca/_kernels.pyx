# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled segment reductions over CSR edge arrays.

Same contract as kernels_np: edges sorted by destination, ``row_ptr``
of length N+1 delimits each destination's segment, and every segment is
non-empty (self-loops).  Inputs must be C-contiguous float64 / int64;
the dispatch layer normalizes them.
"""

import numpy as np

from libc.math cimport exp


def segment_softmax(const double[::1] e, const long long[::1] row_ptr):
    cdef Py_ssize_t n = row_ptr.shape[0] - 1
    out_arr = np.empty(e.shape[0], dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, k, lo, hi
    cdef double m, s
    for i in range(n):
        lo = row_ptr[i]
        hi = row_ptr[i + 1]
        if lo >= hi:
            raise ValueError("empty edge segment; topology must include self-loops")
        m = e[lo]
        for k in range(lo + 1, hi):
            if e[k] > m:
                m = e[k]
        s = 0.0
        for k in range(lo, hi):
            out[k] = exp(e[k] - m)
            s += out[k]
        for k in range(lo, hi):
            out[k] /= s
    return out_arr


def segment_softmax_backward(const double[::1] alpha, const double[::1] d_alpha,
                             const long long[::1] row_ptr):
    cdef Py_ssize_t n = row_ptr.shape[0] - 1
    out_arr = np.empty(alpha.shape[0], dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, k, lo, hi
    cdef double inner
    for i in range(n):
        lo = row_ptr[i]
        hi = row_ptr[i + 1]
        inner = 0.0
        for k in range(lo, hi):
            inner += alpha[k] * d_alpha[k]
        for k in range(lo, hi):
            out[k] = alpha[k] * (d_alpha[k] - inner)
    return out_arr


def gather_weighted_sum(const double[::1] alpha, const double[:, ::1] p,
                        const long long[::1] edge_src,
                        const long long[::1] row_ptr):
    cdef Py_ssize_t n = row_ptr.shape[0] - 1
    cdef Py_ssize_t h = p.shape[1]
    out_arr = np.zeros((n if n > 0 else 0, h), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, k, c, lo, hi, src
    cdef double a
    for i in range(n):
        lo = row_ptr[i]
        hi = row_ptr[i + 1]
        if lo >= hi:
            raise ValueError("empty edge segment; topology must include self-loops")
        for k in range(lo, hi):
            a = alpha[k]
            src = edge_src[k]
            for c in range(h):
                out[i, c] += a * p[src, c]
    return out_arr


def gather_weighted_sum_backward(const double[::1] alpha, const double[:, ::1] p,
                                 const long long[::1] edge_src,
                                 const long long[::1] row_ptr,
                                 const double[:, ::1] d_out):
    cdef Py_ssize_t n = row_ptr.shape[0] - 1
    cdef Py_ssize_t h = p.shape[1]
    d_alpha_arr = np.zeros(alpha.shape[0], dtype=np.float64)
    d_p_arr = np.zeros((p.shape[0], h), dtype=np.float64)
    cdef double[::1] d_alpha = d_alpha_arr
    cdef double[:, ::1] d_p = d_p_arr
    cdef Py_ssize_t i, k, c, lo, hi, src
    cdef double a, acc
    for i in range(n):
        lo = row_ptr[i]
        hi = row_ptr[i + 1]
        for k in range(lo, hi):
            src = edge_src[k]
            a = alpha[k]
            acc = 0.0
            for c in range(h):
                acc += p[src, c] * d_out[i, c]
                d_p[src, c] += a * d_out[i, c]
            d_alpha[k] = acc
    return d_alpha_arr, d_p_arr


def segment_sum(const double[::1] x, const long long[::1] row_ptr):
    cdef Py_ssize_t n = row_ptr.shape[0] - 1
    out_arr = np.zeros(n if n > 0 else 0, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, k
    for i in range(n):
        for k in range(row_ptr[i], row_ptr[i + 1]):
            out[i] += x[k]
    return out_arr


def scatter_add_src(const double[::1] x, const long long[::1] edge_src,
                    Py_ssize_t n):
    out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t k
    for k in range(x.shape[0]):
        out[edge_src[k]] += x[k]
    return out_arr
