# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled causal-convolution kernels.

Drop-in replacement for reprogait.kernels_py; see that module for the
shape conventions.  The accumulation order mirrors the numpy version
(per output element: bias, then one partial sum per kernel tap) so both
backends agree to the last few ulps.  Inputs are taken as const views so
frozen (read-only) parameter arrays pass through untouched.
"""

import numpy as np


def conv1d_forward(x_arr, kernel_arr, bias_arr, Py_ssize_t dilation):
    cdef const double[:, :, ::1] x = np.ascontiguousarray(x_arr, dtype=np.float64)
    cdef const double[:, :, ::1] kernel = np.ascontiguousarray(kernel_arr, dtype=np.float64)
    cdef const double[::1] bias = np.ascontiguousarray(bias_arr, dtype=np.float64)

    cdef Py_ssize_t B = x.shape[0]
    cdef Py_ssize_t C_in = x.shape[1]
    cdef Py_ssize_t T = x.shape[2]
    cdef Py_ssize_t C_out = kernel.shape[0]
    cdef Py_ssize_t K = kernel.shape[2]

    y_arr = np.empty((B, C_out, T), dtype=np.float64)
    cdef double[:, :, ::1] y = y_arr

    cdef Py_ssize_t b, o, t, k, c, s
    cdef double acc, part
    with nogil:
        for b in range(B):
            for o in range(C_out):
                for t in range(T):
                    acc = bias[o]
                    for k in range(K):
                        s = t - k * dilation
                        if s < 0:
                            continue
                        part = 0.0
                        for c in range(C_in):
                            part += kernel[o, c, k] * x[b, c, s]
                        acc += part
                    y[b, o, t] = acc
    return y_arr


def conv1d_backward(x_arr, kernel_arr, Py_ssize_t dilation, gy_arr):
    cdef const double[:, :, ::1] x = np.ascontiguousarray(x_arr, dtype=np.float64)
    cdef const double[:, :, ::1] kernel = np.ascontiguousarray(kernel_arr, dtype=np.float64)
    cdef const double[:, :, ::1] gy = np.ascontiguousarray(gy_arr, dtype=np.float64)

    cdef Py_ssize_t B = x.shape[0]
    cdef Py_ssize_t C_in = x.shape[1]
    cdef Py_ssize_t T = x.shape[2]
    cdef Py_ssize_t C_out = kernel.shape[0]
    cdef Py_ssize_t K = kernel.shape[2]

    gx_arr = np.zeros((B, C_in, T), dtype=np.float64)
    gk_arr = np.zeros((C_out, C_in, K), dtype=np.float64)
    gb_arr = np.zeros(C_out, dtype=np.float64)

    cdef double[:, :, ::1] gx = gx_arr
    cdef double[:, :, ::1] gk = gk_arr
    cdef double[::1] gb = gb_arr

    cdef Py_ssize_t b, o, t, k, c, s
    cdef double g
    with nogil:
        for b in range(B):
            for o in range(C_out):
                for t in range(T):
                    g = gy[b, o, t]
                    gb[o] += g
                    for k in range(K):
                        s = t - k * dilation
                        if s < 0:
                            continue
                        for c in range(C_in):
                            gk[o, c, k] += g * x[b, c, s]
                            gx[b, c, s] += g * kernel[o, c, k]
    return gx_arr, gk_arr, gb_arr
