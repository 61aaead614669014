"""Encoding ground-truth boxes onto the three detection grids.

Each ground-truth box claims exactly one (scale, cell, anchor) slot: the
anchor with the best co-centered IoU and the grid cell containing the box
center.  The stored regression targets are the cell-relative center offsets
``tx, ty`` in [0, 1) and the log dimension ratios ``tw = ln(w / pw)``,
``th = ln(h / ph)``.  :func:`decode_targets` inverts the encoding exactly;
the raw-head decoder in :mod:`comicdet.postprocess` applies a sigmoid to
the predicted offsets instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .anchors import AnchorSet, assign_anchor
from .geometry import Box, Label, LabeledBox
from .network import HEAD_STRIDES, DetectionHeads, NetworkConfig

# Keeps offsets strictly below 1 when a center sits on the far image edge.
_EDGE_EPS = 1e-9


@dataclass(frozen=True)
class TargetGrids:
    """Per-scale training targets.

    objectness: (S, S, B) float64 in {0, 1} — the responsibility mask.
    coords:     (S, S, B, 4) float64 — (tx, ty, tw, th) at responsible slots.
    labels:     (S, S, B) int64 — class index at responsible slots, else -1.
    Grids are indexed [row, col, anchor] with row = y.
    """

    objectness: tuple[np.ndarray, ...]
    coords: tuple[np.ndarray, ...]
    labels: tuple[np.ndarray, ...]
    skipped_small: int = 0
    collisions: int = 0

    @property
    def num_responsible(self) -> int:
        return int(sum(m.sum() for m in self.objectness))


def encode_targets(gts, anchors: AnchorSet, cfg: NetworkConfig) -> TargetGrids:
    """Encode ground-truth boxes (network space) onto the head grids.

    Boxes smaller than one pixel after the resize are skipped and counted;
    two boxes landing on the same slot count as a collision and the later
    box wins.  Centers must lie inside the network frame; a center exactly
    on the far boundary is clamped into the last cell.
    """
    size = cfg.input_size
    B = cfg.boxes_per_cell
    obj = tuple(np.zeros((size // s, size // s, B)) for s in HEAD_STRIDES)
    coords = tuple(np.zeros((size // s, size // s, B, 4)) for s in HEAD_STRIDES)
    labels = tuple(np.full((size // s, size // s, B), -1, dtype=np.int64) for s in HEAD_STRIDES)

    skipped = 0
    collisions = 0
    anchor_arr = anchors.as_array()
    per_scale = len(anchors) // len(HEAD_STRIDES)
    for gt in gts:
        box = gt.box
        if box.w <= 0 or box.h <= 0:
            raise ValueError(f"ground-truth box must have positive dimensions, got {box}")
        if not (0 <= box.cx <= size and 0 <= box.cy <= size):
            raise ValueError(f"ground-truth center {box.cx, box.cy} outside the {size}x{size} frame")
        if box.w < 1.0 or box.h < 1.0:
            skipped += 1
            continue

        scale, a = assign_anchor(box, anchors)
        stride = HEAD_STRIDES[scale]
        s_cells = size // stride
        col = min(int(box.cx / stride), s_cells - 1)
        row = min(int(box.cy / stride), s_cells - 1)
        tx = min(box.cx / stride - col, 1.0 - _EDGE_EPS)
        ty = min(box.cy / stride - row, 1.0 - _EDGE_EPS)
        pw, ph = anchor_arr[scale * per_scale + a]
        tw = math.log(box.w / pw)
        th = math.log(box.h / ph)

        if obj[scale][row, col, a]:
            collisions += 1
        obj[scale][row, col, a] = 1.0
        coords[scale][row, col, a] = (tx, ty, tw, th)
        labels[scale][row, col, a] = int(gt.label)

    return TargetGrids(obj, coords, labels, skipped_small=skipped, collisions=collisions)


def decode_targets(targets: TargetGrids, anchors: AnchorSet, cfg: NetworkConfig) -> list[LabeledBox]:
    """Exact inverse of :func:`encode_targets` over the responsible slots."""
    out: list[LabeledBox] = []
    per = anchors.per_scale
    for scale, stride in enumerate(HEAD_STRIDES):
        mask = targets.objectness[scale]
        for row, col, a in zip(*np.nonzero(mask)):
            tx, ty, tw, th = targets.coords[scale][row, col, a]
            pw, ph = per[scale][a]
            box = Box(
                cx=(tx + col) * stride,
                cy=(ty + row) * stride,
                w=pw * math.exp(tw),
                h=ph * math.exp(th),
            )
            out.append(LabeledBox(box, Label(int(targets.labels[scale][row, col, a]))))
    return out


def targets_to_heads(targets: TargetGrids, cfg: NetworkConfig, saturation: float = 15.0) -> DetectionHeads:
    """Raw head grids that decode back to the encoded targets.

    Offsets are inverted through the logit, objectness and class logits are
    saturated at +-``saturation``.  Useful as the analytic optimum when
    checking the loss and the decoder against each other.
    """
    grids = []
    L = cfg.num_classes
    for scale in range(len(HEAD_STRIDES)):
        s_cells = cfg.input_size // HEAD_STRIDES[scale]
        grid = np.zeros((s_cells, s_cells, cfg.boxes_per_cell, 5 + L))
        grid[..., 4] = -saturation
        mask = targets.objectness[scale]
        for row, col, a in zip(*np.nonzero(mask)):
            tx, ty, tw, th = targets.coords[scale][row, col, a]
            grid[row, col, a, 0] = _logit(tx)
            grid[row, col, a, 1] = _logit(ty)
            grid[row, col, a, 2] = tw
            grid[row, col, a, 3] = th
            grid[row, col, a, 4] = saturation
            cls = np.full(L, -saturation)
            cls[int(targets.labels[scale][row, col, a])] = saturation
            grid[row, col, a, 5:] = cls
        grids.append(grid.reshape(s_cells, s_cells, cfg.head_depth))
    return DetectionHeads(*grids)


def _logit(p: float, eps: float = 1e-12) -> float:
    p = min(max(p, eps), 1.0 - eps)
    return math.log(p / (1.0 - p))
