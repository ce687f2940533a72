# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled CRIP / LBP / block-histogram kernels.

Operation order mirrors ``_fallback`` exactly; the build disables FP
contraction so no fused multiply-adds change the rounding.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef double TIE_RTOL = 1e-12

cdef int R1R[8]
cdef int R1C[8]
cdef int R2R[16]
cdef int R2C[16]
R1R[:] = [-1, -1, -1, 0, 1, 1, 1, 0]
R1C[:] = [-1, 0, 1, 1, 1, 0, -1, -1]
R2R[:] = [-2, -2, -2, -2, -2, -1, 0, 1, 2, 2, 2, 2, 2, 1, 0, -1]
R2C[:] = [-2, -1, 0, 1, 2, 2, 2, 2, 2, 1, 0, -1, -2, -2, -2, -2]


# ring index tables per direction, so the inner loop carries no modulo
cdef int IM2[8]
cdef int IM1[8]
cdef int IP1[8]
cdef int IP2[8]
cdef int JM[8]
cdef int JP[8]
IM2[:] = [6, 7, 0, 1, 2, 3, 4, 5]
IM1[:] = [7, 0, 1, 2, 3, 4, 5, 6]
IP1[:] = [1, 2, 3, 4, 5, 6, 7, 0]
IP2[:] = [2, 3, 4, 5, 6, 7, 0, 1]
JM[:] = [15, 1, 3, 5, 7, 9, 11, 13]
JP[:] = [1, 3, 5, 7, 9, 11, 13, 15]


def crip_map(double[:, ::1] img):
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1]
    out = np.empty((h, w), dtype=np.uint8)
    cdef unsigned char[:, ::1] codes = out
    cdef double[:, ::1] pad = np.pad(np.asarray(img), 2, mode="edge")
    cdef double[:, ::1] apad = np.abs(np.asarray(pad))
    cdef double r1[8]
    cdef double r2[16]
    cdef double c, x, y, s2, tol, m
    cdef Py_ssize_t i, j, d, pi, pj
    cdef int eta
    cdef unsigned char code
    with nogil:
        for i in range(h):
            for j in range(w):
                pi = i + 2
                pj = j + 2
                m = 0.0
                for d in range(-2, 3):
                    if apad[pi + d, pj - 2] > m: m = apad[pi + d, pj - 2]
                    if apad[pi + d, pj - 1] > m: m = apad[pi + d, pj - 1]
                    if apad[pi + d, pj] > m: m = apad[pi + d, pj]
                    if apad[pi + d, pj + 1] > m: m = apad[pi + d, pj + 1]
                    if apad[pi + d, pj + 2] > m: m = apad[pi + d, pj + 2]
                tol = TIE_RTOL * m
                c = pad[pi, pj]
                for d in range(8):
                    r1[d] = pad[pi + R1R[d], pj + R1C[d]]
                for d in range(16):
                    r2[d] = pad[pi + R2R[d], pj + R2C[d]]
                code = 0
                for eta in range(8):
                    s2 = (r2[JM[eta]] + r2[2 * eta]) + r2[JP[eta]]
                    if eta & 1 == 0:
                        x = ((r1[IM2[eta]] + r1[IM1[eta]]) + 2.0 * (c + r1[eta])) \
                            + (r1[IP1[eta]] + r1[IP2[eta]])
                        x = x / 8.0
                        y = (((r1[IM1[eta]] + r1[eta]) + r1[IP1[eta]]) + s2) / 6.0
                    else:
                        x = ((c + r1[IM1[eta]]) + (r1[eta] + r1[IP1[eta]])) / 4.0
                        y = (r1[eta] + s2) / 4.0
                    if (y - x) + tol >= 0.0:
                        code |= <unsigned char>(1 << eta)
                codes[i, j] = code
    return out


def lbp_map(double[:, ::1] img):
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1]
    out = np.empty((h, w), dtype=np.uint8)
    cdef unsigned char[:, ::1] codes = out
    cdef double[:, ::1] pad = np.pad(np.asarray(img), 1, mode="edge")
    cdef Py_ssize_t i, j
    cdef double c
    cdef unsigned char code
    with nogil:
        for i in range(1, h + 1):
            for j in range(1, w + 1):
                c = pad[i, j]
                code = 0
                if pad[i - 1, j - 1] >= c: code |= 1
                if pad[i - 1, j] >= c: code |= 2
                if pad[i - 1, j + 1] >= c: code |= 4
                if pad[i, j + 1] >= c: code |= 8
                if pad[i + 1, j + 1] >= c: code |= 16
                if pad[i + 1, j] >= c: code |= 32
                if pad[i + 1, j - 1] >= c: code |= 64
                if pad[i, j - 1] >= c: code |= 128
                codes[i - 1, j - 1] = code
    return out


def block_histograms(const unsigned char[:, ::1] codes, Py_ssize_t block):
    cdef Py_ssize_t h = codes.shape[0], w = codes.shape[1]
    cdef Py_ssize_t cols = (w + block - 1) // block
    cdef Py_ssize_t rows = (h + block - 1) // block
    out = np.zeros((rows * cols, 256), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] counts = out
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(h):
            for j in range(w):
                counts[(i // block) * cols + j // block, codes[i, j]] += 1
    return out
