# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: depthwise conv1d and max-pool forward/backward.

Contract-identical to fewgest.kernels.reference (the numpy fallback);
float32 and float64 specializations via fused types.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()

IMPL = "fast"

ctypedef fused real_t:
    cnp.float32_t
    cnp.float64_t



def depthwise_conv1d_fwd(real_t[:, :, ::1] x,
                         real_t[:, ::1] w,
                         real_t[::1] b,
                         int stride, int pad):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], length = x.shape[2]
    cdef Py_ssize_t k = w.shape[1]
    cdef Py_ssize_t l_out = (length + 2 * pad - k) // stride + 1
    out = np.empty((n, c, l_out),
                   dtype=np.float32 if real_t is cnp.float32_t else np.float64)
    cdef real_t[:, :, ::1] y = out
    cdef Py_ssize_t i, j, t, q, src
    cdef real_t acc
    with nogil:
        for i in range(n):
            for j in range(c):
                for t in range(l_out):
                    acc = b[j]
                    for q in range(k):
                        src = t * stride + q - pad
                        if 0 <= src < length:
                            acc = acc + x[i, j, src] * w[j, q]
                    y[i, j, t] = acc
    return out


def depthwise_conv1d_bwd(real_t[:, :, ::1] x,
                         real_t[:, ::1] w,
                         real_t[:, :, ::1] gy,
                         int stride, int pad):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], length = x.shape[2]
    cdef Py_ssize_t k = w.shape[1]
    cdef Py_ssize_t l_out = gy.shape[2]
    dt = np.float32 if real_t is cnp.float32_t else np.float64
    gx_arr = np.zeros((n, c, length), dtype=dt)
    gw_arr = np.zeros((c, k), dtype=dt)
    gb_arr = np.zeros(c, dtype=dt)
    cdef real_t[:, :, ::1] gx = gx_arr
    cdef real_t[:, ::1] gw = gw_arr
    cdef real_t[::1] gb = gb_arr
    cdef Py_ssize_t i, j, t, q, src
    cdef real_t g
    with nogil:
        for i in range(n):
            for j in range(c):
                for t in range(l_out):
                    g = gy[i, j, t]
                    gb[j] = gb[j] + g
                    for q in range(k):
                        src = t * stride + q - pad
                        if 0 <= src < length:
                            gw[j, q] = gw[j, q] + x[i, j, src] * g
                            gx[i, j, src] = gx[i, j, src] + w[j, q] * g
    return gx_arr, gw_arr, gb_arr


def maxpool1d_fwd(real_t[:, :, ::1] x, int k, int stride):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], length = x.shape[2]
    cdef Py_ssize_t l_out = (length - k) // stride + 1
    y_arr = np.empty((n, c, l_out),
                     dtype=np.float32 if real_t is cnp.float32_t else np.float64)
    idx_arr = np.empty((n, c, l_out), dtype=np.int64)
    cdef real_t[:, :, ::1] y = y_arr
    cdef cnp.int64_t[:, :, ::1] idx = idx_arr
    cdef Py_ssize_t i, j, t, q, best
    cdef real_t v, cur
    with nogil:
        for i in range(n):
            for j in range(c):
                for t in range(l_out):
                    best = t * stride
                    v = x[i, j, best]
                    for q in range(1, k):
                        cur = x[i, j, t * stride + q]
                        if cur > v:
                            v = cur
                            best = t * stride + q
                    y[i, j, t] = v
                    idx[i, j, t] = best
    return y_arr, idx_arr


def maxpool1d_bwd(real_t[:, :, ::1] gy,
                  cnp.int64_t[:, :, ::1] idx, Py_ssize_t l_in):
    cdef Py_ssize_t n = gy.shape[0], c = gy.shape[1], l_out = gy.shape[2]
    gx_arr = np.zeros((n, c, l_in),
                      dtype=np.float32 if real_t is cnp.float32_t else np.float64)
    cdef real_t[:, :, ::1] gx = gx_arr
    cdef Py_ssize_t i, j, t
    with nogil:
        for i in range(n):
            for j in range(c):
                for t in range(l_out):
                    gx[i, j, idx[i, j, t]] += gy[i, j, t]
    return gx_arr
