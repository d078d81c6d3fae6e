# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Schur-complement kernels walking sparse coefficient triplets.

Triplets are grouped per active parameter: parameter j owns entries
ptr[j]..ptr[j+1]-1 of (rows, cols, vals), in the full-COO convention
A_j = sum(v * e_r e_c^T).
"""

from libc.string cimport memset

import numpy as np


def schur_block(
    double[:, ::1] winv,
    long[::1] ptr,
    long[::1] rows,
    long[::1] cols,
    double[::1] vals,
    double[:, ::1] out,
):
    """out[i, j] = tr(A_i Winv A_j Winv) for all active parameter pairs."""
    cdef Py_ssize_t na = ptr.shape[0] - 1
    cdef Py_ssize_t d = winv.shape[0]
    cdef Py_ssize_t i, j, t, a, b
    cdef long r, c
    cdef double v, wa, acc
    cdef double[::1] m = np.zeros(d * d)

    with nogil:
        for j in range(na):
            # m = Winv A_j Winv via rank-one accumulation
            memset(&m[0], 0, d * d * sizeof(double))
            for t in range(ptr[j], ptr[j + 1]):
                r = rows[t]
                c = cols[t]
                v = vals[t]
                for a in range(d):
                    wa = v * winv[a, r]
                    if wa != 0.0:
                        for b in range(d):
                            m[a * d + b] += wa * winv[c, b]
            # tr(A_i m) = sum over triplets of A_i of v * m[c, r]
            for i in range(j + 1):
                acc = 0.0
                for t in range(ptr[i], ptr[i + 1]):
                    acc += vals[t] * m[cols[t] * d + rows[t]]
                out[i, j] = acc
                out[j, i] = acc


def apply_block(
    double[::1] yact,
    long[::1] ptr,
    long[::1] rows,
    long[::1] cols,
    double[::1] vals,
    double[:, ::1] out,
):
    """out += sum_j yact[j] * A_j."""
    cdef Py_ssize_t na = ptr.shape[0] - 1
    cdef Py_ssize_t j, t
    cdef double yj
    with nogil:
        for j in range(na):
            yj = yact[j]
            if yj != 0.0:
                for t in range(ptr[j], ptr[j + 1]):
                    out[rows[t], cols[t]] += yj * vals[t]


def adjoint_block(
    double[:, ::1] z,
    long[::1] ptr,
    long[::1] rows,
    long[::1] cols,
    double[::1] vals,
    double[::1] out,
):
    """out[j] = <A_j, Z>."""
    cdef Py_ssize_t na = ptr.shape[0] - 1
    cdef Py_ssize_t j, t
    cdef double acc
    with nogil:
        for j in range(na):
            acc = 0.0
            for t in range(ptr[j], ptr[j + 1]):
                acc += vals[t] * z[rows[t], cols[t]]
            out[j] = acc
