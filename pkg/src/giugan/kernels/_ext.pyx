# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled im2col / col2im kernels.

Column layout is (N, Ho, Wo, C, K, K) so that a conv reduces to one
(N*Ho*Wo, C*K*K) matrix product without a copy.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def im2col(const double[:, :, :, ::1] x, int k, int stride, int pad):
    cdef Py_ssize_t n_img = x.shape[0], c_in = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t ho = (h + 2 * pad - k) // stride + 1
    cdef Py_ssize_t wo = (w + 2 * pad - k) // stride + 1
    out_arr = np.zeros((n_img, ho, wo, c_in, k, k), dtype=np.float64)
    cdef double[:, :, :, :, :, ::1] out = out_arr
    cdef Py_ssize_t n, c, oi, oj, u, v, ii, jj
    for n in range(n_img):
        for oi in range(ho):
            for oj in range(wo):
                for c in range(c_in):
                    for u in range(k):
                        ii = oi * stride + u - pad
                        if ii < 0 or ii >= h:
                            continue
                        for v in range(k):
                            jj = oj * stride + v - pad
                            if jj < 0 or jj >= w:
                                continue
                            out[n, oi, oj, c, u, v] = x[n, c, ii, jj]
    return out_arr


def col2im(const double[:, :, :, :, :, ::1] cols, int h, int w, int stride, int pad):
    cdef Py_ssize_t n_img = cols.shape[0], ho = cols.shape[1], wo = cols.shape[2]
    cdef Py_ssize_t c_in = cols.shape[3], k = cols.shape[4]
    out_arr = np.zeros((n_img, c_in, h, w), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t n, c, oi, oj, u, v, ii, jj
    for n in range(n_img):
        for oi in range(ho):
            for oj in range(wo):
                for c in range(c_in):
                    for u in range(k):
                        ii = oi * stride + u - pad
                        if ii < 0 or ii >= h:
                            continue
                        for v in range(k):
                            jj = oj * stride + v - pad
                            if jj < 0 or jj >= w:
                                continue
                            out[n, c, ii, jj] += cols[n, oi, oj, c, u, v]
    return out_arr
