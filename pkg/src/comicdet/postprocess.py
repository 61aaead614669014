"""Decoding raw head grids into scored boxes and suppressing duplicates.

For a slot at grid cell (row, col) with anchor (pw, ph) on a stride-s grid,
the raw values (tx, ty, tw, th, to, tc...) decode to

    center = ((sigmoid(tx) + col) * s, (sigmoid(ty) + row) * s)
    dims   = (pw * exp(tw), ph * exp(th))
    P_obj  = sigmoid(to)

with class scores per the configured head mode.  Every slot decodes, so the
candidate count is (S1^2 + S2^2 + S3^2) * B — 10647 with the defaults.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .anchors import AnchorSet
from .geometry import Box, Label
from .kernels import nms_keep
from .network import HEAD_STRIDES, DetectionHeads, NetworkConfig, class_probabilities


@dataclass(frozen=True)
class Detection:
    """One decoded box; ``class_prob`` is the winning class's score."""

    box: Box
    label: Label
    objectness: float
    class_prob: float

    @property
    def score(self) -> float:
        return self.objectness * self.class_prob


def decode(heads: DetectionHeads, anchors: AnchorSet, cfg: NetworkConfig) -> list[Detection]:
    """Decode every slot of the three head grids into a Detection."""
    boxes, obj, probs = decode_arrays(heads, anchors, cfg)
    labels = probs.argmax(axis=1)
    best = probs[np.arange(len(probs)), labels]
    return [
        Detection(
            box=Box(*boxes[i]),
            label=Label(int(labels[i])),
            objectness=float(obj[i]),
            class_prob=float(best[i]),
        )
        for i in range(len(boxes))
    ]


def decode_arrays(heads: DetectionHeads, anchors: AnchorSet, cfg: NetworkConfig):
    """Vectorized decode: (boxes (N, 4) center form, objectness (N,), class probs (N, L)).

    Slots are ordered scale-major (coarsest first), then row, column, anchor.
    """
    B = cfg.boxes_per_cell
    L = cfg.num_classes
    per_scale = anchors.per_scale
    all_boxes, all_obj, all_probs = [], [], []
    for scale, grid in enumerate(heads.grids()):
        grid = np.asarray(grid, dtype=np.float64)
        if not np.all(np.isfinite(grid)):
            raise ValueError("non-finite raw values in detection heads")
        s_cells = grid.shape[0]
        stride = HEAD_STRIDES[scale]
        if grid.shape != (s_cells, s_cells, B * (5 + L)):
            raise ValueError(f"head grid {grid.shape} inconsistent with config")
        p = grid.reshape(s_cells, s_cells, B, 5 + L)

        rows = np.arange(s_cells).reshape(s_cells, 1, 1)
        cols = np.arange(s_cells).reshape(1, s_cells, 1)
        cx = (_sigmoid(p[..., 0]) + cols) * stride
        cy = (_sigmoid(p[..., 1]) + rows) * stride
        pa = np.asarray(per_scale[scale])
        w = pa[:, 0] * np.exp(p[..., 2])
        h = pa[:, 1] * np.exp(p[..., 3])
        obj = _sigmoid(p[..., 4])
        probs = class_probabilities(p[..., 5:], cfg.head_mode)

        all_boxes.append(np.stack([cx, cy, w, h], axis=-1).reshape(-1, 4))
        all_obj.append(obj.reshape(-1))
        all_probs.append(probs.reshape(-1, L))
    return np.concatenate(all_boxes), np.concatenate(all_obj), np.concatenate(all_probs)


def _sigmoid(y):
    out = np.empty_like(y)
    pos = y >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-y[pos]))
    ey = np.exp(y[~pos])
    out[~pos] = ey / (1.0 + ey)
    return out


def filter_objectness(dets, threshold: float = 0.70) -> list[Detection]:
    """Keep detections with objectness strictly greater than the threshold."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    return [d for d in dets if d.objectness > threshold]


def nms(dets, iou_threshold: float = 0.5) -> list[Detection]:
    """Greedy per-class non-maximal suppression.

    Within each class, detections are visited in descending
    objectness * class_prob order (ties keep input order); one is dropped
    iff it overlaps an already kept same-class detection with IoU strictly
    above the threshold.  The kept detections are returned sorted by score.
    """
    kept: list[tuple[float, int]] = []
    by_label: dict[Label, list[int]] = {}
    for i, d in enumerate(dets):
        by_label.setdefault(d.label, []).append(i)
    for label, idxs in by_label.items():
        boxes = np.array([dets[i].box.corners() for i in idxs])
        scores = np.array([dets[i].score for i in idxs])
        for j in nms_keep(boxes, scores, iou_threshold):
            kept.append((scores[j], idxs[j]))
    kept.sort(key=lambda t: (-t[0], t[1]))
    return [dets[i] for _, i in kept]
