# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: Laplace inverse-CDF transform, exact two-sample KS,
nearest-neighbour table lookup. Semantics match _pykern exactly (integer KS
arithmetic is identical; the Laplace transform agrees to float round-off)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, fabs

cnp.import_array()

IMPLEMENTATION = "compiled"

cdef double _TINY = 2.2250738585072014e-308


def laplace_from_uniform(u_in, double scale):
    cdef double[::1] u = np.ascontiguousarray(u_in, dtype=np.float64).ravel()
    cdef Py_ssize_t i, n = u.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double ui, arg, sgn
    with nogil:
        for i in range(n):
            ui = u[i]
            arg = 1.0 - 2.0 * fabs(ui)
            if arg < _TINY:
                arg = _TINY
            sgn = 0.0
            if ui > 0.0:
                sgn = 1.0
            elif ui < 0.0:
                sgn = -1.0
            out[i] = -scale * sgn * log(arg)
    return out_arr.reshape(np.shape(u_in))


cdef inline Py_ssize_t _bisect_right(const double* a, double x, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if x < a[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


cdef inline Py_ssize_t _bisect_left(const double* a, double x, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef long long _ks_numer(const double* t, Py_ssize_t n, const double* ref, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t i
    cdef long long best = 0, v
    for i in range(n):
        v = _bisect_right(t, t[i], n) * m - _bisect_right(ref, t[i], m) * n
        if v < 0:
            v = -v
        if v > best:
            best = v
        v = _bisect_left(t, t[i], n) * m - _bisect_left(ref, t[i], m) * n
        if v < 0:
            v = -v
        if v > best:
            best = v
    return best


def ks_distance_sorted(test_in, ref_in):
    cdef double[::1] t = np.ascontiguousarray(test_in, dtype=np.float64)
    cdef double[::1] ref = np.ascontiguousarray(ref_in, dtype=np.float64)
    cdef Py_ssize_t n = t.shape[0], m = ref.shape[0]
    cdef long long best
    with nogil:
        best = _ks_numer(&t[0], n, &ref[0], m)
    return best / float(n * m)


def ks_distance_rows(tests_in, ref_in):
    cdef double[:, ::1] tests = np.ascontiguousarray(tests_in, dtype=np.float64)
    cdef double[::1] ref = np.ascontiguousarray(ref_in, dtype=np.float64)
    cdef Py_ssize_t rows = tests.shape[0], n = tests.shape[1], m = ref.shape[0], r
    out_arr = np.empty(rows, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double denom = float(n * m)
    with nogil:
        for r in range(rows):
            out[r] = _ks_numer(&tests[r, 0], n, &ref[0], m) / denom
    return out_arr


def nearest_index(sorted_in, queries_in):
    cdef double[::1] sv = np.ascontiguousarray(sorted_in, dtype=np.float64)
    cdef double[::1] q = np.ascontiguousarray(queries_in, dtype=np.float64).ravel()
    cdef Py_ssize_t k = sv.shape[0], nq = q.shape[0], i
    mids_arr = np.empty(k - 1 if k > 1 else 0, dtype=np.float64)
    cdef double[::1] mids = mids_arr
    out_arr = np.empty(nq, dtype=np.int64)
    cdef long long[::1] out = out_arr
    with nogil:
        for i in range(k - 1):
            mids[i] = 0.5 * (sv[i] + sv[i + 1])
        for i in range(nq):
            out[i] = _bisect_left(&mids[0], q[i], k - 1)
    return out_arr.reshape(np.shape(queries_in))
