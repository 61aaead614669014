# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled box kernels: pairwise IoU, co-centered IoU and greedy NMS.

Must stay semantically identical to ``comicdet.kernels._reference``; the
test suite cross-checks both backends on the same inputs.
"""

import numpy as np

cimport numpy as cnp


cdef inline double _pair_iou(double ax1, double ay1, double ax2, double ay2,
                             double bx1, double by1, double bx2, double by2) nogil:
    cdef double ix = (ax2 if ax2 < bx2 else bx2) - (ax1 if ax1 > bx1 else bx1)
    cdef double iy = (ay2 if ay2 < by2 else by2) - (ay1 if ay1 > by1 else by1)
    if ix <= 0 or iy <= 0:
        return 0.0
    cdef double inter = ix * iy
    cdef double union_ = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union_


def iou_matrix(a, b):
    """Pairwise IoU of corner-form boxes, shape (N, 4) x (M, 4) -> (N, M)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] A = np.ascontiguousarray(a, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] B = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = A.shape[0], m = B.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n, m), dtype=np.float64)
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(n):
            for j in range(m):
                out[i, j] = _pair_iou(A[i, 0], A[i, 1], A[i, 2], A[i, 3],
                                      B[j, 0], B[j, 1], B[j, 2], B[j, 3])
    return out


def cocentered_iou(wh, anchors):
    """IoU of (w, h) pairs against anchor (pw, ph) pairs, as if sharing a center."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] W = np.ascontiguousarray(wh, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] P = np.ascontiguousarray(anchors, dtype=np.float64)
    cdef Py_ssize_t n = W.shape[0], k = P.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n, k), dtype=np.float64)
    cdef Py_ssize_t i, j
    cdef double iw, ih, inter
    with nogil:
        for i in range(n):
            for j in range(k):
                iw = W[i, 0] if W[i, 0] < P[j, 0] else P[j, 0]
                ih = W[i, 1] if W[i, 1] < P[j, 1] else P[j, 1]
                inter = iw * ih
                if inter <= 0:
                    out[i, j] = 0.0
                else:
                    out[i, j] = inter / (W[i, 0] * W[i, 1] + P[j, 0] * P[j, 1] - inter)
    return out


def nms_keep(boxes, scores, double iou_threshold):
    """Greedy NMS; suppression is strict (IoU > threshold), ties keep input order."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] B = np.ascontiguousarray(boxes, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] s = np.ascontiguousarray(scores, dtype=np.float64)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] order = np.argsort(-s, kind="stable")
    cdef Py_ssize_t n = B.shape[0]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] suppressed = np.zeros(n, dtype=np.uint8)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] keep = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t n_keep = 0
    cdef Py_ssize_t a, b, i, j
    with nogil:
        for a in range(n):
            i = order[a]
            if suppressed[i]:
                continue
            keep[n_keep] = i
            n_keep += 1
            for b in range(a + 1, n):
                j = order[b]
                if suppressed[j]:
                    continue
                if _pair_iou(B[i, 0], B[i, 1], B[i, 2], B[i, 3],
                             B[j, 0], B[j, 1], B[j, 2], B[j, 3]) > iou_threshold:
                    suppressed[j] = 1
    return keep[:n_keep].copy()
