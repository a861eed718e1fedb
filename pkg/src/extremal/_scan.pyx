# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled scan kernels: single-pass interval minima and top-k selection.

Must stay result-identical to ``_scan_py``: minima are order-independent and
top-k uses the total order (value, id)."""

import numpy as np


def interval_mins(const double[::1] pos, const double[::1] vals,
                  const double[::1] los, const double[::1] his):
    """Min of vals over points with los[j] <= pos <= his[j], +inf when empty."""
    cdef Py_ssize_t n = pos.shape[0]
    cdef Py_ssize_t b = los.shape[0]
    out_arr = np.full(b, np.inf)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double p, v
    for i in range(n):
        p = pos[i]
        v = vals[i]
        for j in range(b):
            if los[j] <= p <= his[j] and v < out[j]:
                out[j] = v
    return out_arr


def topk_smallest(const double[::1] vals, const long long[::1] ids, Py_ssize_t k):
    """Positions of the k smallest (vals, ids) pairs, sorted ascending."""
    cdef Py_ssize_t n = vals.shape[0]
    cdef Py_ssize_t m = k
    if m > n:
        m = n
    if m <= 0:
        return np.empty(0, dtype=np.int64)
    buf_arr = np.empty(m, dtype=np.int64)
    cdef long long[::1] buf = buf_arr
    cdef Py_ssize_t filled = 0, i, j, worst
    cdef double v
    cdef long long idv
    for i in range(n):
        v = vals[i]
        idv = ids[i]
        if filled == m:
            worst = buf[filled - 1]
            if v > vals[worst] or (v == vals[worst] and idv >= ids[worst]):
                continue
            filled -= 1
        j = filled
        while j > 0 and (vals[buf[j - 1]] > v or
                         (vals[buf[j - 1]] == v and ids[buf[j - 1]] > idv)):
            buf[j] = buf[j - 1]
            j -= 1
        buf[j] = i
        filled += 1
    return buf_arr
