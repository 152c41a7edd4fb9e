# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled im2row / col2im kernels for the conv hot path."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef fused real:
    float
    double


def im2row(real[:, :, :, ::1] x, int k, int stride):
    """Gather conv patches of a [B,C,H,W] array into [B*Ho*Wo, C*k*k] rows."""
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t Ho = (H - k) // stride + 1
    cdef Py_ssize_t Wo = (W - k) // stride + 1
    if real is float:
        out_arr = np.empty((B * Ho * Wo, C * k * k), dtype=np.float32)
    else:
        out_arr = np.empty((B * Ho * Wo, C * k * k), dtype=np.float64)
    cdef real[:, ::1] out = out_arr
    cdef Py_ssize_t b, c, oh, ow, kh, kw, row, base
    with nogil:
        for b in range(B):
            for oh in range(Ho):
                for ow in range(Wo):
                    row = (b * Ho + oh) * Wo + ow
                    for c in range(C):
                        base = c * k * k
                        for kh in range(k):
                            for kw in range(k):
                                out[row, base + kh * k + kw] = x[
                                    b, c, oh * stride + kh, ow * stride + kw
                                ]
    return out_arr


def col2im_add(real[:, ::1] gcols, Py_ssize_t B, Py_ssize_t C, Py_ssize_t H,
               Py_ssize_t W, int k, int stride):
    """Scatter-add patch-row gradients back onto a [B,C,H,W] grid."""
    cdef Py_ssize_t Ho = (H - k) // stride + 1
    cdef Py_ssize_t Wo = (W - k) // stride + 1
    if real is float:
        gx_arr = np.zeros((B, C, H, W), dtype=np.float32)
    else:
        gx_arr = np.zeros((B, C, H, W), dtype=np.float64)
    cdef real[:, :, :, ::1] gx = gx_arr
    cdef Py_ssize_t b, c, oh, ow, kh, kw, row, base
    with nogil:
        for b in range(B):
            for oh in range(Ho):
                for ow in range(Wo):
                    row = (b * Ho + oh) * Wo + ow
                    for c in range(C):
                        base = c * k * k
                        for kh in range(k):
                            for kw in range(k):
                                gx[b, c, oh * stride + kh, ow * stride + kw] += gcols[
                                    row, base + kh * k + kw
                                ]
    return gx_arr
