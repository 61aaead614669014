"""Shared fixtures and independent oracles for the test suite.

Oracles here deliberately avoid the library's own fast paths: IoU by pixel
rasterization, NMS by a rescanning greedy loop over Detection objects,
matching by exhaustive enumeration.
"""

import itertools

import numpy as np

from comicdet import AnchorSet, Box, Label, LabeledBox, NetworkConfig, iou
from comicdet.postprocess import Detection

NINE_ANCHORS = ((350, 420), (280, 300), (200, 380), (140, 200), (110, 130), (80, 150), (50, 70), (35, 45), (20, 28))


def anchor_set():
    return AnchorSet.from_pairs(NINE_ANCHORS)


def default_cfg(**kwargs):
    return NetworkConfig(anchors=anchor_set(), **kwargs)


def tiny_cfg(**kwargs):
    kwargs.setdefault("input_size", 64)
    kwargs.setdefault("width_multiplier", 0.0625)
    return NetworkConfig(anchors=anchor_set(), **kwargs)


def rasterized_iou(a: Box, b: Box, canvas: int = 512) -> float:
    """Pixel-membership IoU: count pixels whose centers fall inside each box."""
    xs = np.arange(canvas) + 0.5
    ys = np.arange(canvas) + 0.5
    xx, yy = np.meshgrid(xs, ys)

    def member(box):
        return (xx >= box.x_min) & (xx < box.x_max) & (yy >= box.y_min) & (yy < box.y_max)

    ma, mb = member(a), member(b)
    union = np.logical_or(ma, mb).sum()
    if union == 0:
        return 0.0
    return np.logical_and(ma, mb).sum() / union


def greedy_nms_oracle(dets, iou_threshold):
    """Per-class greedy NMS that rescans every kept box, then sorts by score."""
    kept = []
    for label in {d.label for d in dets}:
        group = [(i, d) for i, d in enumerate(dets) if d.label == label]
        group.sort(key=lambda t: (-t[1].score, t[0]))
        group_kept = []
        for i, d in group:
            if all(iou(d.box, k.box) <= iou_threshold for _, k in group_kept):
                group_kept.append((i, d))
        kept.extend(group_kept)
    kept.sort(key=lambda t: (-t[1].score, t[0]))
    return [d for _, d in kept]


def max_matching_oracle(dets, gts, iou_min):
    """Maximum-cardinality one-to-one matching above iou_min (brute force)."""
    edges = [
        [j for j, g in enumerate(gts) if g.label == d.label and iou(d.box, g.box) > iou_min]
        for d in dets
    ]
    best = 0
    order = range(len(dets))
    for assignment in itertools.product(*[e + [None] for e in edges]) if dets else [()]:
        used = [a for a in assignment if a is not None]
        if len(used) == len(set(used)):
            best = max(best, len(used))
    return best


def random_detections(rng, n, span=200.0, labels=tuple(Label)):
    out = []
    for _ in range(n):
        w, h = rng.uniform(5, span / 2, 2)
        cx = rng.uniform(w / 2, span - w / 2)
        cy = rng.uniform(h / 2, span - h / 2)
        out.append(
            Detection(
                box=Box(cx, cy, w, h),
                label=labels[rng.integers(len(labels))],
                objectness=float(rng.uniform(0.01, 1.0)),
                class_prob=float(rng.uniform(0.01, 1.0)),
            )
        )
    return out


def random_gts(rng, n, span=200.0, labels=tuple(Label)):
    out = []
    for _ in range(n):
        w, h = rng.uniform(5, span / 2, 2)
        cx = rng.uniform(w / 2, span - w / 2)
        cy = rng.uniform(h / 2, span - h / 2)
        out.append(LabeledBox(Box(cx, cy, w, h), labels[rng.integers(len(labels))]))
    return out
