"""NumPy reference implementation of the box kernels.

Semantics here are the contract; the compiled backend must match it
bit-for-bit (same IoU formula, same stable score ordering, same strict
suppression inequality).  All inputs are coerced to float64.
"""

import numpy as np


def iou_matrix(a, b):
    """Pairwise IoU of corner-form boxes, shape (N, 4) x (M, 4) -> (N, M)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ix = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    iy = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(ix, 0.0, None) * np.clip(iy, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    pos = inter > 0
    out[pos] = inter[pos] / union[pos]
    return out


def cocentered_iou(wh, anchors):
    """IoU of (w, h) pairs against anchor (pw, ph) pairs, as if sharing a center.

    Shapes (N, 2) x (K, 2) -> (N, K).
    """
    wh = np.asarray(wh, dtype=np.float64)
    anchors = np.asarray(anchors, dtype=np.float64)
    iw = np.minimum(wh[:, None, 0], anchors[None, :, 0])
    ih = np.minimum(wh[:, None, 1], anchors[None, :, 1])
    inter = iw * ih
    union = wh[:, 0:1] * wh[:, 1:2] + (anchors[:, 0] * anchors[:, 1])[None, :] - inter
    out = np.zeros_like(inter)
    pos = inter > 0
    out[pos] = inter[pos] / union[pos]
    return out


def nms_keep(boxes, scores, iou_threshold):
    """Greedy NMS over corner-form boxes; returns kept indices in score order.

    A box is suppressed iff its IoU with an already kept box is strictly
    greater than ``iou_threshold``.  Ties in score keep input order.
    """
    boxes = np.asarray(boxes, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-scores, kind="stable")
    x1, y1, x2, y2 = boxes[:, 0], boxes[:, 1], boxes[:, 2], boxes[:, 3]
    areas = (x2 - x1) * (y2 - y1)
    keep = []
    while order.size > 0:
        i = order[0]
        keep.append(int(i))
        rest = order[1:]
        ix = np.minimum(x2[i], x2[rest]) - np.maximum(x1[i], x1[rest])
        iy = np.minimum(y2[i], y2[rest]) - np.maximum(y1[i], y1[rest])
        inter = np.clip(ix, 0.0, None) * np.clip(iy, 0.0, None)
        union = areas[i] + areas[rest] - inter
        ovr = np.zeros_like(inter)
        pos = inter > 0
        ovr[pos] = inter[pos] / union[pos]
        order = rest[ovr <= iou_threshold]
    return np.asarray(keep, dtype=np.intp)
