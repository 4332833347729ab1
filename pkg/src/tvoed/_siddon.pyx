# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled incremental (Siddon / Amanatides-Woo) traversal of the unit grid."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, ceil, fabs, sqrt, INFINITY

cnp.import_array()


cdef inline Py_ssize_t _start_index(double p, double d, Py_ssize_t N):
    cdef Py_ssize_t i
    if d > 0:
        i = <Py_ssize_t>floor(p * N)
    elif d < 0:
        i = <Py_ssize_t>ceil(p * N) - 1
    else:
        i = <Py_ssize_t>floor(p * N)
    if i < 0:
        i = 0
    elif i > N - 1:
        i = N - 1
    return i


def trace_rays(double[:, ::1] origins, double[:, ::1] directions, Py_ssize_t N,
               double[::1] t_lo, double[::1] t_hi, double min_length):
    cdef Py_ssize_t R = origins.shape[0]
    cdef Py_ssize_t dim = origins.shape[1]
    cdef Py_ssize_t cap = R * (dim * N + 2)
    indptr_arr = np.zeros(R + 1, dtype=np.int64)
    indices_arr = np.empty(cap, dtype=np.int64)
    lengths_arr = np.empty(cap, dtype=np.float64)
    cdef long long[::1] indptr = indptr_arr
    cdef long long[::1] indices = indices_arr
    cdef double[::1] lengths = lengths_arr

    cdef double o[3]
    cdef double dv[3]
    cdef double tnext[3]
    cdef Py_ssize_t cell[3]
    cdef Py_ssize_t stride[3]
    cdef Py_ssize_t r, a, amin, nnz = 0, lin
    cdef double tin, tout, t0, t1, norm, tcur, tend, p, inv_n = 1.0 / N
    cdef bint empty

    stride[0] = 1
    stride[1] = N
    stride[2] = N * N

    for r in range(R):
        indptr[r] = nnz
        tin = t_lo[r]
        tout = t_hi[r]
        empty = False
        norm = 0.0
        for a in range(dim):
            o[a] = origins[r, a]
            dv[a] = directions[r, a]
            norm += dv[a] * dv[a]
        norm = sqrt(norm)
        for a in range(dim):
            if dv[a] != 0.0:
                t0 = (0.0 - o[a]) / dv[a]
                t1 = (1.0 - o[a]) / dv[a]
                if t0 > t1:
                    t0, t1 = t1, t0
                if t0 > tin:
                    tin = t0
                if t1 < tout:
                    tout = t1
            elif o[a] < 0.0 or o[a] > 1.0:
                empty = True
        if empty or tout <= tin:
            continue

        for a in range(dim):
            p = o[a] + tin * dv[a]
            cell[a] = _start_index(p, dv[a], N)
            if dv[a] > 0:
                tnext[a] = ((cell[a] + 1) * inv_n - o[a]) / dv[a]
            elif dv[a] < 0:
                tnext[a] = (cell[a] * inv_n - o[a]) / dv[a]
            else:
                tnext[a] = INFINITY

        tcur = tin
        while True:
            amin = 0
            for a in range(1, dim):
                if tnext[a] < tnext[amin]:
                    amin = a
            tend = tnext[amin]
            if tend > tout:
                tend = tout
            if (tend - tcur) * norm > min_length:
                lin = 0
                for a in range(dim):
                    lin += cell[a] * stride[a]
                indices[nnz] = lin
                lengths[nnz] = (tend - tcur) * norm
                nnz += 1
            if tend > tcur:
                tcur = tend
            if tcur >= tout:
                break
            if dv[amin] > 0:
                cell[amin] += 1
                if cell[amin] >= N:
                    break
                tnext[amin] = ((cell[amin] + 1) * inv_n - o[amin]) / dv[amin]
            else:
                cell[amin] -= 1
                if cell[amin] < 0:
                    break
                tnext[amin] = (cell[amin] * inv_n - o[amin]) / dv[amin]
    indptr[R] = nnz
    return indptr_arr, indices_arr[:nnz].copy(), lengths_arr[:nnz].copy()
