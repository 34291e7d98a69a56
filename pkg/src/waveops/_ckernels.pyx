# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled phasor-sum kernel.

Each atom's phasor is advanced by a fixed complex step and re-seeded from
the exact phase every ``RESEED`` steps, which bounds the recurrence drift to
a few ulps while avoiding a sincos per (n, atom) pair.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, floor, M_PI
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()

cdef enum:
    RESEED = 32


cdef inline double _frac(int64_t n, double theta, uint64_t num, uint64_t den,
                         bint exact) nogil:
    cdef int64_t r
    cdef double x
    if exact:
        r = n % <int64_t>den
        if r < 0:
            r += <int64_t>den
        return <double>((<uint64_t>r * num) % den) / <double>den
    x = <double>n * theta
    return x - floor(x)


def frac_turns(ns, turns, nums, den):
    cdef const int64_t[::1] nv = np.ascontiguousarray(ns, dtype=np.int64)
    cdef const double[::1] tv = np.ascontiguousarray(turns, dtype=np.float64)
    cdef bint exact = nums is not None
    cdef const uint64_t[::1] uv
    if exact:
        uv = np.ascontiguousarray(nums, dtype=np.uint64)
    else:
        uv = np.zeros(tv.shape[0], dtype=np.uint64)
    cdef uint64_t d = <uint64_t>(den if exact else 1)
    cdef Py_ssize_t a, j
    out = np.empty((nv.shape[0], tv.shape[0]), dtype=np.float64)
    cdef double[:, ::1] ov = out
    with nogil:
        for a in range(nv.shape[0]):
            for j in range(tv.shape[0]):
                ov[a, j] = _frac(nv[a], tv[j], uv[j], d, exact)
    return out


def phasor_sums(coef, turns, nums, den, long long n0, Py_ssize_t count, int sign):
    cdef const double complex[:, ::1] cv = np.ascontiguousarray(coef, dtype=np.complex128)
    cdef const double[::1] tv = np.ascontiguousarray(turns, dtype=np.float64)
    cdef bint exact = nums is not None
    cdef const uint64_t[::1] uv
    if exact:
        uv = np.ascontiguousarray(nums, dtype=np.uint64)
    else:
        uv = np.zeros(tv.shape[0], dtype=np.uint64)
    cdef uint64_t d = <uint64_t>(den if exact else 1)
    cdef Py_ssize_t R = cv.shape[0], m = cv.shape[1]
    out = np.zeros((count, R), dtype=np.complex128)
    cdef double complex[:, ::1] ov = out
    cdef Py_ssize_t j, t, r
    cdef double ang, s = <double>sign * 2.0 * M_PI
    cdef double complex z, stp, c
    with nogil:
        for j in range(m):
            ang = s * _frac(1, tv[j], uv[j], d, exact)
            stp = cos(ang) + 1j * sin(ang)
            for t in range(count):
                if t % RESEED == 0:
                    ang = s * _frac(n0 + t, tv[j], uv[j], d, exact)
                    z = cos(ang) + 1j * sin(ang)
                else:
                    z = z * stp
                for r in range(R):
                    ov[t, r] = ov[t, r] + cv[r, j] * z
    return out.T.copy()
