# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Signatures mirror :mod:`stochshape._pykernels`."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, isfinite

cnp.import_array()


def legendre_table(int lmax, double[::1] x):
    """Orthonormalised associated Legendre values, shape (len(x), n_lm).

    Column ``l*(l+1)//2 + m`` holds the normalised P_l^m(x), Condon-Shortley
    phase included, for 0 <= m <= l <= lmax.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t ncol = (lmax + 1) * (lmax + 2) // 2
    out_arr = np.zeros((n, ncol), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i
    cdef int l, m
    cdef double xi, s, pmm, p1, p2, p, a, b
    cdef double c0 = sqrt(1.0 / (4.0 * 3.141592653589793))
    for i in range(n):
        xi = x[i]
        s = sqrt(max(0.0, (1.0 - xi) * (1.0 + xi)))
        pmm = c0
        for m in range(lmax + 1):
            if m > 0:
                pmm = -sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * pmm
            out[i, m * (m + 1) // 2 + m] = pmm
            if m == lmax:
                break
            p2 = pmm
            p1 = sqrt(2.0 * m + 3.0) * xi * pmm
            out[i, (m + 1) * (m + 2) // 2 + m] = p1
            for l in range(m + 2, lmax + 1):
                a = sqrt((4.0 * l * l - 1.0) / (<double>l * l - <double>m * m))
                b = sqrt(((l - 1.0) * (l - 1.0) - <double>m * m) / (4.0 * (l - 1.0) * (l - 1.0) - 1.0))
                p = a * (xi * p1 - b * p2)
                out[i, l * (l + 1) // 2 + m] = p
                p2 = p1
                p1 = p
    return out_arr


def em_affine(double[::1] x0, double[:, ::1] dw, double dt,
              double b0, double b1, double s0, double s1):
    """Euler-Maruyama for dX = (b0 + b1 X) dt + (s0 + s1 X) dW.

    Returns ``(paths, bad_step)``; ``bad_step`` is the first step index that
    produced a non-finite state, or -1.
    """
    cdef Py_ssize_t n = dw.shape[0]
    cdef Py_ssize_t k_steps = dw.shape[1]
    paths_arr = np.empty((n, k_steps + 1), dtype=np.float64)
    cdef double[:, ::1] paths = paths_arr
    cdef Py_ssize_t p, k
    cdef double x
    cdef Py_ssize_t bad = -1
    for p in range(n):
        x = x0[p]
        paths[p, 0] = x
        for k in range(k_steps):
            x = x + (b0 + b1 * x) * dt + (s0 + s1 * x) * dw[p, k]
            paths[p, k + 1] = x
            if not isfinite(x):
                if bad < 0 or k + 1 < bad:
                    bad = k + 1
                for k in range(k + 1, k_steps):
                    paths[p, k + 1] = x
                break
    return paths_arr, bad
