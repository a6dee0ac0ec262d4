# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: truncated polynomial products and nearest-point distances."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


cdef void _mul_into(const double complex[:] a, const double complex[:] b,
                    const cnp.int64_t[:] ti, const cnp.int64_t[:] tj,
                    const cnp.int64_t[:] tk, double complex[:] out) noexcept nogil:
    cdef Py_ssize_t t, m = ti.shape[0]
    cdef double complex ai
    for t in range(out.shape[0]):
        out[t] = 0
    for t in range(m):
        ai = a[ti[t]]
        if ai.real == 0.0 and ai.imag == 0.0:
            continue
        out[tk[t]] += ai * b[tj[t]]


def trunc_mul(a, b, ti, tj, tk):
    """Product of two dense truncated polynomials through a precomputed index table."""
    cdef const double complex[:] av = np.ascontiguousarray(a, dtype=np.complex128)
    cdef const double complex[:] bv = np.ascontiguousarray(b, dtype=np.complex128)
    out = np.zeros(av.shape[0], dtype=np.complex128)
    cdef double complex[:] ov = out
    cdef const cnp.int64_t[:] tiv = ti
    cdef const cnp.int64_t[:] tjv = tj
    cdef const cnp.int64_t[:] tkv = tk
    _mul_into(av, bv, tiv, tjv, tkv, ov)
    return out


def monomial_powers(g, parent, var, ti, tj, tk):
    """Rows of the result hold g**alpha for every monomial alpha of the table.

    ``parent[a]`` is the monomial ``alpha - e_var[a]``; row 0 is the constant 1.
    """
    cdef const double complex[:, :] gv = np.ascontiguousarray(g, dtype=np.complex128)
    cdef const cnp.int64_t[:] pv = parent
    cdef const cnp.int64_t[:] vv = var
    cdef const cnp.int64_t[:] tiv = ti
    cdef const cnp.int64_t[:] tjv = tj
    cdef const cnp.int64_t[:] tkv = tk
    cdef Py_ssize_t nmono = gv.shape[1], a
    powers = np.zeros((nmono, nmono), dtype=np.complex128)
    cdef double complex[:, :] P = powers
    P[0, 0] = 1.0
    with nogil:
        for a in range(1, nmono):
            _mul_into(P[pv[a]], gv[vv[a]], tiv, tjv, tkv, P[a])
    return powers


def nearest_sq_dist(points, cloud):
    """Squared distance from each row of ``points`` to its nearest row of ``cloud``."""
    cdef const double[:, :] pv = np.ascontiguousarray(points, dtype=np.float64)
    cdef const double[:, :] cv = np.ascontiguousarray(cloud, dtype=np.float64)
    cdef Py_ssize_t p = pv.shape[0], q = cv.shape[0], dim = pv.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double best, acc, diff
    out = np.empty(p, dtype=np.float64)
    cdef double[:] ov = out
    with nogil:
        for i in range(p):
            best = 1.0e308
            for j in range(q):
                acc = 0.0
                for c in range(dim):
                    diff = pv[i, c] - cv[j, c]
                    acc = acc + diff * diff
                    if acc >= best:
                        break
                if acc < best:
                    best = acc
            ov[i] = best
    return out
