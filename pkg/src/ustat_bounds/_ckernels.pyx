# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for configuration enumeration and sampled evaluation.

Both routines accumulate probabilities left to right over coordinates and
kernel terms in table order, which is the order used by ``_pykernels``; the
two backends therefore agree bit for bit.
"""
import numpy as np
from libc.stdint cimport int64_t

ctypedef int64_t i64


def enumerate_chunk(i64 start, i64 count,
                    const i64[::1] radices,
                    const double[::1] probs_flat, const i64[::1] prob_off,
                    const double[::1] tables_flat, const i64[::1] table_off,
                    const i64[:, ::1] term_coords, const i64[:, ::1] term_strides,
                    double[::1] out_vals, double[::1] out_probs):
    cdef Py_ssize_t nc = radices.shape[0]
    cdef Py_ssize_t nt = table_off.shape[0]
    cdef Py_ssize_t m = term_coords.shape[1]
    cdef i64[::1] digits = np.zeros(max(nc, 1), dtype=np.int64)
    cdef Py_ssize_t c, t, j
    cdef i64 r, rem, pos
    cdef double pr, s
    with nogil:
        rem = start
        c = nc - 1
        while c >= 0:
            digits[c] = rem % radices[c]
            rem = rem // radices[c]
            c -= 1
        for r in range(count):
            pr = 1.0
            for c in range(nc):
                pr = pr * probs_flat[prob_off[c] + digits[c]]
            s = 0.0
            for t in range(nt):
                pos = table_off[t]
                for j in range(m):
                    pos = pos + term_strides[t, j] * digits[term_coords[t, j]]
                s = s + tables_flat[pos]
            out_vals[r] = s
            out_probs[r] = pr
            c = nc - 1
            while c >= 0:
                digits[c] += 1
                if digits[c] < radices[c]:
                    break
                digits[c] = 0
                c -= 1


def eval_sampled(const i64[:, ::1] idx,
                 const double[::1] tables_flat, const i64[::1] table_off,
                 const i64[:, ::1] term_coords, const i64[:, ::1] term_strides,
                 double[::1] out_vals):
    cdef Py_ssize_t R = idx.shape[0]
    cdef Py_ssize_t nt = table_off.shape[0]
    cdef Py_ssize_t m = term_coords.shape[1]
    cdef Py_ssize_t r, t, j
    cdef i64 pos
    cdef double s
    with nogil:
        for r in range(R):
            s = 0.0
            for t in range(nt):
                pos = table_off[t]
                for j in range(m):
                    pos = pos + term_strides[t, j] * idx[r, term_coords[t, j]]
                s = s + tables_flat[pos]
            out_vals[r] = s
