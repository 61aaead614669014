"""Anchor priors: K-means clustering of box dimensions and scale assignment.

Anchors are (width, height) pairs in network-space pixels.  Clustering uses
the 1 - IoU distance with boxes compared as if co-centered, so large panels
do not dominate the objective the way they would under Euclidean distance.
The resulting anchors are sorted by descending area and split three per
detection scale, largest first (the coarsest grid owns the largest priors).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .geometry import Box
from .kernels import cocentered_iou

ANCHORS_PER_SCALE = 3
NUM_SCALES = 3

_MAX_ITERATIONS = 300


@dataclass(frozen=True)
class AnchorSet:
    """Ordered anchor priors, descending by area pw * ph."""

    anchors: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.anchors) < 1:
            raise ConfigError("anchor set cannot be empty")
        areas = [pw * ph for pw, ph in self.anchors]
        if any(pw <= 0 or ph <= 0 for pw, ph in self.anchors):
            raise ConfigError("anchor dimensions must be positive")
        if any(a < b for a, b in zip(areas, areas[1:])):
            raise ConfigError("anchors must be ordered by descending area")

    @classmethod
    def from_pairs(cls, pairs) -> "AnchorSet":
        """Build an AnchorSet from unordered (pw, ph) pairs."""
        ordered = sorted(((float(w), float(h)) for w, h in pairs), key=lambda p: -(p[0] * p[1]))
        return cls(tuple(ordered))

    def __len__(self) -> int:
        return len(self.anchors)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.anchors, dtype=np.float64)

    @property
    def per_scale(self) -> tuple[tuple[tuple[float, float], ...], ...]:
        """Anchors grouped per detection scale, coarsest (largest) scale first."""
        if len(self.anchors) % NUM_SCALES != 0:
            raise ConfigError(f"{len(self.anchors)} anchors cannot be split across {NUM_SCALES} scales")
        per = len(self.anchors) // NUM_SCALES
        return tuple(self.anchors[i * per : (i + 1) * per] for i in range(NUM_SCALES))

    def scale_anchors(self, scale: int) -> tuple[tuple[float, float], ...]:
        return self.per_scale[scale]

    def to_json(self) -> str:
        return json.dumps({"anchors": [list(a) for a in self.anchors]}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "AnchorSet":
        try:
            payload = json.loads(text)
            pairs = payload["anchors"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"not a valid anchor file: {exc}") from exc
        return cls(tuple((float(w), float(h)) for w, h in pairs))

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "AnchorSet":
        with open(path) as fh:
            return cls.from_json(fh.read())


def _kmeanspp_init(dims: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded k-means++ initialization under the 1 - IoU distance."""
    centers = np.empty((k, 2), dtype=np.float64)
    centers[0] = dims[rng.integers(len(dims))]
    for i in range(1, k):
        d = 1.0 - cocentered_iou(dims, centers[:i])
        nearest = d.min(axis=1)
        weights = nearest**2
        total = weights.sum()
        if total <= 0:
            # All points coincide with a chosen center; any choice works.
            centers[i] = dims[rng.integers(len(dims))]
        else:
            centers[i] = dims[rng.choice(len(dims), p=weights / total)]
    return centers


def kmeans_iou(dims, k: int, seed: int):
    """Lloyd iterations under 1 - IoU distance with k-means++ seeding.

    Returns ``(centers, objective_history)`` where the history holds the
    mean distance to the assigned center after each assignment step.  The
    update uses per-cluster means; if a mean update would worsen the
    objective the previous centers are kept and iteration stops, so the
    history is non-increasing by construction.  Empty clusters are
    re-seeded with the point currently farthest from its center.
    """
    dims = np.asarray(dims, dtype=np.float64)
    if dims.ndim != 2 or dims.shape[1] != 2:
        raise ValueError("dims must be an (N, 2) array of (w, h) pairs")
    if np.any(dims <= 0):
        raise ValueError("box dimensions must be positive")
    if len(np.unique(dims, axis=0)) < k:
        raise DataError(
            f"need at least {k} distinct (w, h) pairs to form {k} clusters; "
            "reduce k or add more ground-truth boxes"
        )

    rng = np.random.default_rng(seed)
    centers = _kmeanspp_init(dims, k, rng)

    history: list[float] = []
    prev_centers = centers
    prev_assign = None
    rows = np.arange(len(dims))
    for _ in range(_MAX_ITERATIONS):
        dist = 1.0 - cocentered_iou(dims, centers)
        assign = dist.argmin(axis=1)

        # Re-seed empty clusters with the worst-served point.
        for c in range(k):
            if not np.any(assign == c):
                farthest = int(dist[rows, assign].argmax())
                centers = centers.copy()
                centers[c] = dims[farthest]
                dist = 1.0 - cocentered_iou(dims, centers)
                assign = dist.argmin(axis=1)
                assign[farthest] = c

        objective = float(dist[rows, assign].mean())
        if history and objective > history[-1]:
            centers = prev_centers  # mean update made things worse; revert and stop
            break
        history.append(objective)
        if prev_assign is not None and np.array_equal(assign, prev_assign):
            break
        prev_assign = assign
        prev_centers = centers
        new_centers = centers.copy()
        for c in range(k):
            members = dims[assign == c]
            if len(members):
                new_centers[c] = members.mean(axis=0)
        if np.allclose(new_centers, centers):
            break
        centers = new_centers

    return centers, history


def cluster_anchors(gt_dims, k: int = 9, *, seed: int) -> AnchorSet:
    """Cluster ground-truth (w, h) pairs into k anchor priors.

    Deterministic for a fixed seed.  Requires at least k distinct pairs.
    """
    dims = np.asarray(gt_dims, dtype=np.float64)
    if len(dims) < k:
        raise DataError(f"need at least {k} ground-truth boxes, got {len(dims)}")
    centers, _ = kmeans_iou(dims, k, seed)
    return AnchorSet.from_pairs(centers)


def assign_anchor(gt: Box, anchors: AnchorSet) -> tuple[int, int]:
    """Best anchor for a ground-truth box by co-centered IoU.

    Returns ``(scale, index_within_scale)`` with scale 0 the coarsest grid.
    Depends only on the box dimensions; ties break toward the lower index.
    """
    if len(anchors) % NUM_SCALES != 0:
        raise ConfigError(f"anchor set of {len(anchors)} cannot be partitioned across {NUM_SCALES} scales")
    ious = cocentered_iou(np.array([[gt.w, gt.h]]), anchors.as_array())[0]
    best = int(ious.argmax())
    per = len(anchors) // NUM_SCALES
    return best // per, best % per
