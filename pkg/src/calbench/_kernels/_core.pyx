# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the hot kernels in ``_pure``.

Inputs are scores/labels sorted by score ascending, contiguous float64.
Semantics must match ``_pure`` exactly; keep the two in sync.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, pow

cnp.import_array()


cdef inline Py_ssize_t _lower_bound(const double* a, Py_ssize_t n, double x) nogil:
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef void _prefix(const double* a, double* out, Py_ssize_t n) nogil:
    cdef Py_ssize_t i
    out[0] = 0.0
    for i in range(n):
        out[i + 1] = out[i] + a[i]


cdef double _em_value(const double* cs, const double* cy,
                      Py_ssize_t n, Py_ssize_t b, double p) nogil:
    cdef Py_ssize_t k, e0, e1, cnt
    cdef double fbar, ybar, total = 0.0
    for k in range(b):
        e0 = (k * n) // b
        e1 = ((k + 1) * n) // b
        cnt = e1 - e0
        fbar = (cs[e1] - cs[e0]) / cnt
        ybar = (cy[e1] - cy[e0]) / cnt
        total += (cnt / <double>n) * pow(fabs(fbar - ybar), p)
    return pow(total, 1.0 / p)


cdef double _ew_value(const double* ss, const double* cs, const double* cy,
                      Py_ssize_t n, Py_ssize_t b, double p) nogil:
    cdef Py_ssize_t j, e0 = 0, e1, cnt
    cdef double fbar, ybar, total = 0.0
    for j in range(1, b + 1):
        if j == b:
            e1 = n
        else:
            e1 = _lower_bound(ss, n, (<double>j) / (<double>b))
        cnt = e1 - e0
        if cnt > 0:
            fbar = (cs[e1] - cs[e0]) / cnt
            ybar = (cy[e1] - cy[e0]) / cnt
            total += (cnt / <double>n) * pow(fabs(fbar - ybar), p)
        e0 = e1
    return pow(total, 1.0 / p)


def ew_stats(const double[::1] ss, const double[::1] sl, Py_ssize_t b):
    cdef Py_ssize_t n = ss.shape[0]
    counts_arr = np.empty(b, dtype=np.int64)
    sum_s_arr = np.empty(b, dtype=np.float64)
    sum_y_arr = np.empty(b, dtype=np.float64)
    cs_arr = np.empty(n + 1, dtype=np.float64)
    cy_arr = np.empty(n + 1, dtype=np.float64)
    cdef long long[::1] counts = counts_arr
    cdef double[::1] sum_s = sum_s_arr, sum_y = sum_y_arr
    cdef double[::1] cs = cs_arr, cy = cy_arr
    cdef Py_ssize_t j, e0 = 0, e1
    with nogil:
        _prefix(&ss[0], &cs[0], n)
        _prefix(&sl[0], &cy[0], n)
        for j in range(1, b + 1):
            if j == b:
                e1 = n
            else:
                e1 = _lower_bound(&ss[0], n, (<double>j) / (<double>b))
            counts[j - 1] = e1 - e0
            sum_s[j - 1] = cs[e1] - cs[e0]
            sum_y[j - 1] = cy[e1] - cy[e0]
            e0 = e1
    return counts_arr, sum_s_arr, sum_y_arr


def em_stats(const double[::1] ss, const double[::1] sl, Py_ssize_t b):
    cdef Py_ssize_t n = ss.shape[0]
    counts_arr = np.empty(b, dtype=np.int64)
    sum_s_arr = np.empty(b, dtype=np.float64)
    sum_y_arr = np.empty(b, dtype=np.float64)
    cs_arr = np.empty(n + 1, dtype=np.float64)
    cy_arr = np.empty(n + 1, dtype=np.float64)
    cdef long long[::1] counts = counts_arr
    cdef double[::1] sum_s = sum_s_arr, sum_y = sum_y_arr
    cdef double[::1] cs = cs_arr, cy = cy_arr
    cdef Py_ssize_t k, e0, e1
    with nogil:
        _prefix(&ss[0], &cs[0], n)
        _prefix(&sl[0], &cy[0], n)
        for k in range(b):
            e0 = (k * n) // b
            e1 = ((k + 1) * n) // b
            counts[k] = e1 - e0
            sum_s[k] = cs[e1] - cs[e0]
            sum_y[k] = cy[e1] - cy[e0]
    return counts_arr, sum_s_arr, sum_y_arr


def em_sweep(const double[::1] ss, const double[::1] sl, double p):
    cdef Py_ssize_t n = ss.shape[0]
    if n == 1:
        return float(fabs(ss[0] - sl[0])), 1
    cs_arr = np.empty(n + 1, dtype=np.float64)
    cy_arr = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] cs = cs_arr, cy = cy_arr
    cdef Py_ssize_t b, k, e0, e1, b_used = n
    cdef double h, h_prev, value
    cdef bint violated
    with nogil:
        _prefix(&ss[0], &cs[0], n)
        _prefix(&sl[0], &cy[0], n)
        for b in range(2, n + 1):
            violated = False
            h_prev = -1.0
            for k in range(b):
                e0 = (k * n) // b
                e1 = ((k + 1) * n) // b
                h = (cy[e1] - cy[e0]) / (e1 - e0)
                if h < h_prev:
                    violated = True
                    break
                h_prev = h
            if violated:
                b_used = b - 1
                break
        value = _em_value(&cs[0], &cy[0], n, b_used, p)
    return value, b_used


def ew_sweep(const double[::1] ss, const double[::1] sl, double p):
    cdef Py_ssize_t n = ss.shape[0]
    if n == 1:
        return float(fabs(ss[0] - sl[0])), 1
    cs_arr = np.empty(n + 1, dtype=np.float64)
    cy_arr = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] cs = cs_arr, cy = cy_arr
    cdef Py_ssize_t b, j, e0, e1, b_used = n
    cdef double h, h_prev, value
    cdef bint violated
    with nogil:
        _prefix(&ss[0], &cs[0], n)
        _prefix(&sl[0], &cy[0], n)
        for b in range(2, n + 1):
            violated = False
            h_prev = -1.0
            e0 = 0
            for j in range(1, b + 1):
                if j == b:
                    e1 = n
                else:
                    e1 = _lower_bound(&ss[0], n, (<double>j) / (<double>b))
                if e1 > e0:
                    h = (cy[e1] - cy[e0]) / (e1 - e0)
                    if h < h_prev:
                        violated = True
                        break
                    h_prev = h
                e0 = e1
            if violated:
                b_used = b - 1
                break
        value = _ew_value(&ss[0], &cs[0], &cy[0], n, b_used, p)
    return value, b_used


def pav(const double[::1] y):
    cdef Py_ssize_t n = y.shape[0]
    sums_arr = np.empty(n, dtype=np.float64)
    cnts_arr = np.empty(n, dtype=np.int64)
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] sums = sums_arr
    cdef long long[::1] cnts = cnts_arr
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j, k, top = 0
    cdef double mean
    with nogil:
        for i in range(n):
            sums[top] = y[i]
            cnts[top] = 1
            top += 1
            while top >= 2 and sums[top - 2] * cnts[top - 1] > sums[top - 1] * cnts[top - 2]:
                sums[top - 2] += sums[top - 1]
                cnts[top - 2] += cnts[top - 1]
                top -= 1
        k = 0
        for i in range(top):
            mean = sums[i] / cnts[i]
            for j in range(cnts[i]):
                out[k] = mean
                k += 1
    return out_arr
