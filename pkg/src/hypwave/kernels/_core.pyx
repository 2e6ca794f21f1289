# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled fused RHS kernels: one pass computes the 5-point Laplacian and,
for the wave-map case, the pointwise nonlinearity phi*(-pi^2 + |grad phi|^2)
using the same centered/one-sided stencils as the numpy reference."""

import numpy as np
cimport numpy as cnp

IMPL = "cython"


cdef inline double _dxx(double[:, ::1] v, Py_ssize_t i, Py_ssize_t j,
                        Py_ssize_t n, double inv_h2) nogil:
    if i == 0:
        return (2.0 * v[0, j] - 5.0 * v[1, j] + 4.0 * v[2, j] - v[3, j]) * inv_h2
    if i == n - 1:
        return (2.0 * v[n-1, j] - 5.0 * v[n-2, j] + 4.0 * v[n-3, j] - v[n-4, j]) * inv_h2
    return (v[i+1, j] - 2.0 * v[i, j] + v[i-1, j]) * inv_h2


cdef inline double _dyy(double[:, ::1] v, Py_ssize_t i, Py_ssize_t j,
                        Py_ssize_t n, double inv_h2) nogil:
    if j == 0:
        return (2.0 * v[i, 0] - 5.0 * v[i, 1] + 4.0 * v[i, 2] - v[i, 3]) * inv_h2
    if j == n - 1:
        return (2.0 * v[i, n-1] - 5.0 * v[i, n-2] + 4.0 * v[i, n-3] - v[i, n-4]) * inv_h2
    return (v[i, j+1] - 2.0 * v[i, j] + v[i, j-1]) * inv_h2


cdef inline double _dx(double[:, ::1] v, Py_ssize_t i, Py_ssize_t j,
                       Py_ssize_t n, double inv_2h) nogil:
    if i == 0:
        return (-3.0 * v[0, j] + 4.0 * v[1, j] - v[2, j]) * inv_2h
    if i == n - 1:
        return (3.0 * v[n-1, j] - 4.0 * v[n-2, j] + v[n-3, j]) * inv_2h
    return (v[i+1, j] - v[i-1, j]) * inv_2h


cdef inline double _dy(double[:, ::1] v, Py_ssize_t i, Py_ssize_t j,
                       Py_ssize_t n, double inv_2h) nogil:
    if j == 0:
        return (-3.0 * v[i, 0] + 4.0 * v[i, 1] - v[i, 2]) * inv_2h
    if j == n - 1:
        return (3.0 * v[i, n-1] - 4.0 * v[i, n-2] + v[i, n-3]) * inv_2h
    return (v[i, j+1] - v[i, j-1]) * inv_2h


def rhs_linear(cnp.ndarray[double, ndim=2] phi_arr,
               cnp.ndarray[double, ndim=2] pi_arr,
               double h,
               cnp.ndarray[double, ndim=2] out_arr):
    cdef double[:, ::1] phi = np.ascontiguousarray(phi_arr)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t n = phi.shape[0]
    cdef Py_ssize_t i, j
    cdef double inv_h2 = 1.0 / (h * h)
    with nogil:
        for i in range(n):
            for j in range(n):
                out[i, j] = _dxx(phi, i, j, n, inv_h2) + _dyy(phi, i, j, n, inv_h2)
    return out_arr


def rhs_wavemap(cnp.ndarray[double, ndim=2] phi_arr,
                cnp.ndarray[double, ndim=2] pi_arr,
                double h,
                cnp.ndarray[double, ndim=2] out_arr):
    cdef double[:, ::1] phi = np.ascontiguousarray(phi_arr)
    cdef double[:, ::1] pi = np.ascontiguousarray(pi_arr)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t n = phi.shape[0]
    cdef Py_ssize_t i, j
    cdef double inv_h2 = 1.0 / (h * h)
    cdef double inv_2h = 0.5 / h
    cdef double gx, gy, p
    with nogil:
        for i in range(n):
            for j in range(n):
                gx = _dx(phi, i, j, n, inv_2h)
                gy = _dy(phi, i, j, n, inv_2h)
                p = pi[i, j]
                out[i, j] = (_dxx(phi, i, j, n, inv_h2)
                             + _dyy(phi, i, j, n, inv_h2)
                             + phi[i, j] * (-p * p + gx * gx + gy * gy))
    return out_arr
