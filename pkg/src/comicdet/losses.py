"""Training loss over the three detection grids.

Composition: binary cross-entropy on objectness over every slot (positives
and negatives alike, no ignore region), with the positive and negative
parts normalized separately so the handful of responsible slots is not
drowned out by the thousands of negatives; squared error on the box
targets at responsible slots, with a sigmoid applied to the predicted
center offsets before comparison; and a classification term at responsible
slots that is per-class binary cross-entropy in sigmoid mode or
cross-entropy in softmax mode.  Each term is averaged over its own
support, weighted (1.0 each by default) and summed, so the total is
non-negative and approaches zero only when every responsible slot matches
its target exactly and every negative slot drives its objectness
probability to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .errors import DivergenceError
from .network import DetectionHeads, NetworkConfig
from .targets import TargetGrids


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    coord: float
    objectness: float
    classification: float


def stack_targets(target_list):
    """Batch a list of TargetGrids into per-scale torch tensors.

    Returns (objectness, coords, labels), each a tuple over scales with a
    leading batch dimension.
    """
    n_scales = len(target_list[0].objectness)
    obj, coords, labels = [], [], []
    for s in range(n_scales):
        obj.append(torch.from_numpy(np.stack([t.objectness[s] for t in target_list])).float())
        coords.append(torch.from_numpy(np.stack([t.coords[s] for t in target_list])).float())
        labels.append(torch.from_numpy(np.stack([t.labels[s] for t in target_list])).long())
    return tuple(obj), tuple(coords), tuple(labels)


def batch_loss(head_tensors, batched_targets, cfg: NetworkConfig, weights=(1.0, 1.0, 1.0)):
    """Differentiable loss on raw head tensors (N, head_depth, S, S).

    Returns ``(total, LossBreakdown)`` where ``total`` is a torch scalar
    suitable for backprop.  Raises DivergenceError on non-finite heads.
    """
    obj_t, coord_t, label_t = batched_targets
    B = cfg.boxes_per_cell
    L = cfg.num_classes
    w_coord, w_obj, w_cls = weights

    pos_obj_sum = head_tensors[0].new_zeros(())
    neg_obj_sum = head_tensors[0].new_zeros(())
    coord_sum = head_tensors[0].new_zeros(())
    cls_sum = head_tensors[0].new_zeros(())
    n_pos = 0
    n_neg = 0
    n_resp = 0

    for scale, raw in enumerate(head_tensors):
        if not torch.isfinite(raw).all():
            raise DivergenceError("non-finite values in detection heads")
        n, _, s, _ = raw.shape
        # channel layout is anchor-major: [b * (5 + L) + j]
        p = raw.reshape(n, B, 5 + L, s, s).permute(0, 3, 4, 1, 2)

        obj_target = obj_t[scale].to(raw.dtype)
        obj_bce = F.binary_cross_entropy_with_logits(p[..., 4], obj_target, reduction="none")
        pos_obj_sum = pos_obj_sum + (obj_bce * obj_target).sum()
        neg_obj_sum = neg_obj_sum + (obj_bce * (1.0 - obj_target)).sum()
        n_pos += int(obj_target.sum())
        n_neg += obj_target.numel() - int(obj_target.sum())

        mask = obj_t[scale] > 0.5
        k = int(mask.sum())
        n_resp += k
        if k:
            pred_box = torch.cat([torch.sigmoid(p[..., 0:2]), p[..., 2:4]], dim=-1)
            diff = pred_box[mask] - coord_t[scale][mask].to(raw.dtype)
            coord_sum = coord_sum + (diff**2).sum()

            cls_logits = p[..., 5:][mask]
            cls_idx = label_t[scale][mask]
            if cfg.head_mode == "softmax":
                cls_sum = cls_sum + F.cross_entropy(cls_logits, cls_idx, reduction="sum")
            else:
                one_hot = F.one_hot(cls_idx, num_classes=L).to(raw.dtype)
                cls_sum = cls_sum + F.binary_cross_entropy_with_logits(
                    cls_logits, one_hot, reduction="sum"
                ) / L

    obj_term = pos_obj_sum / max(n_pos, 1) + neg_obj_sum / max(n_neg, 1)
    coord_term = coord_sum / max(n_resp, 1)
    cls_term = cls_sum / max(n_resp, 1)
    total = w_coord * coord_term + w_obj * obj_term + w_cls * cls_term
    breakdown = LossBreakdown(
        total=float(total.detach()),
        coord=float(coord_term.detach()) * w_coord,
        objectness=float(obj_term.detach()) * w_obj,
        classification=float(cls_term.detach()) * w_cls,
    )
    return total, breakdown


def detection_loss(heads: DetectionHeads, targets: TargetGrids, cfg: NetworkConfig, weights=(1.0, 1.0, 1.0)):
    """Loss of one sample's raw head grids against its targets.

    Numpy-friendly wrapper around :func:`batch_loss`; returns
    ``(total, LossBreakdown)`` with ``total`` a plain float.
    """
    tensors = []
    for g in heads.grids():
        arr = np.ascontiguousarray(g, dtype=np.float32)
        tensors.append(torch.from_numpy(arr).permute(2, 0, 1).unsqueeze(0))
    total, breakdown = batch_loss(tuple(tensors), stack_targets([targets]), cfg, weights)
    return float(total), breakdown
